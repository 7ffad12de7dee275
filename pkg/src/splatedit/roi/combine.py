"""Set algebra applying user modifications to a trained RoI.

membership' = ((trained ∪ add) − del) ∩ box. Written order matters: a
point listed in both add and del ends up excluded. Box membership tests
the Gaussian center strictly inside the cuboid; no box means no spatial
restriction.
"""

from __future__ import annotations

import numpy as np

from ..core.types import ContractError, GaussianScene
from .types import GaussianRoi, RoiModification


def combine_roi(
    trained: GaussianRoi,
    mods: RoiModification,
    scene: GaussianScene,
) -> GaussianRoi:
    n = len(scene)
    if trained.membership.shape[0] != n:
        raise ContractError("trained RoI length does not match the scene")
    for index in mods.add_indices | mods.del_indices:
        if not (0 <= index < n):
            raise ContractError(f"RoI modification index {index} out of range [0, {n})")

    membership = trained.membership.copy()
    if mods.add_indices:
        membership[list(mods.add_indices)] = True
    if mods.del_indices:
        membership[list(mods.del_indices)] = False
    if mods.box is not None:
        membership &= mods.box.contains(scene.positions)
    return GaussianRoi(membership=membership, soft=trained.soft.copy())
