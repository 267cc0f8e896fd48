"""Fit a bias subspace from counterfactual pairs and remove it by projection."""

import json

import numpy as np

from biasaudit.debias_ops import fit_bias_subspace, project_out

rng = np.random.default_rng(21)
dim = 16
bias_direction = rng.standard_normal(dim)
bias_direction /= np.linalg.norm(bias_direction)

# Counterfactual pairs differ (mostly) along the planted direction.
pairs = []
for _ in range(12):
    anchor = rng.standard_normal(dim)
    offset = rng.uniform(0.8, 1.6) * bias_direction + 0.05 * rng.standard_normal(dim)
    pairs.append((anchor + offset, anchor - offset))

subspace = fit_bias_subspace(pairs, n_components=2)
print("explained eigenvalues:", [round(v, 4) for v in subspace.explained])
alignment = abs(float(subspace.basis[0] @ bias_direction))
print(f"|cos(basis[0], planted direction)| = {alignment:.4f}")

h = rng.standard_normal(dim) + 2.0 * bias_direction
cleaned = project_out(h, subspace)
print(f"\n|<h, planted>| before: {abs(h @ bias_direction):.4f}")
print(f"|<h_proj, planted>| after: {abs(cleaned @ bias_direction):.4f}")
print(f"|<h_proj, basis[0]>| (exact removal): {abs(cleaned @ subspace.basis[0]):.2e}")

# The subspace serializes to plain JSON for the debias-embeddings command.
payload = json.dumps(subspace.to_json_obj())
print(f"\nserialized subspace: {len(payload)} bytes of JSON")
