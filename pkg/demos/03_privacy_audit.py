#!/usr/bin/env python3
"""Audit what a single database learns about the desired index.

The exact audit enumerates every permutation realization a database can
see.  The honest scheme passes.  Two broken variants fail.  Dropping the
stage-1 sums of undesired messages changes the query's shape.  Skipping the
shuffle of the desired message keeps the shape but not the distribution,
and the audit names a query whose probability depends on the index.
"""

from scpir import make_params, verify_privacy_exact, verify_privacy_sampled
from scpir.protocol import Mutation

params = make_params(3, 2, 2)
print(verify_privacy_exact(params).to_text())

broken = verify_privacy_exact(params, db_index=1, mutation=Mutation(skip_symmetrization_stage=1))
print(broken.to_text())

leaky = verify_privacy_exact(make_params(2, 2, 2), db_index=1, mutation=Mutation(unpermuted_desired=True))
print(leaky.to_text())

# Too many realizations to enumerate here, so sample instead
print(verify_privacy_sampled(make_params(3, 3, 2), db_index=1, trials=3000, seed=1).to_text())
