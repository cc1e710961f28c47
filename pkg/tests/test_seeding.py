"""Seed derivation: deterministic, distinct across stages, rejects garbage."""

import pytest

from kernagg import derive_seed
from kernagg.seeding import (
    STAGE_DATA,
    STAGE_MACHINES,
    STAGE_PARTITION,
    STAGE_PROJECTION,
    STAGE_SPLIT,
    STAGE_TUNING,
)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(42, 1, 2, 3) == derive_seed(42, 1, 2, 3)

    def test_part_order_matters(self):
        assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)

    def test_stages_distinct(self):
        stages = [
            STAGE_DATA,
            STAGE_SPLIT,
            STAGE_PARTITION,
            STAGE_MACHINES,
            STAGE_PROJECTION,
            STAGE_TUNING,
        ]
        seeds = {derive_seed(7, s, 0) for s in stages}
        assert len(seeds) == len(stages)

    def test_replications_distinct(self):
        seeds = {derive_seed(0, STAGE_SPLIT, r) for r in range(100)}
        assert len(seeds) == 100

    def test_range(self):
        s = derive_seed(123456789, 4, 17)
        assert 0 <= s < 2**64

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            derive_seed(-1, 0)
        with pytest.raises(ValueError):
            derive_seed(0, -3)
