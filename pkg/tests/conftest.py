"""Pytest configuration and fixtures for tests."""

from pathlib import Path

import numpy as np
import pytest

from pckd.core.rng import StreamFactory
from pckd.modules.data import Dataset, DatasetRepository, chrono_split, generate_synthetic, preprocess
from pckd.modules.trainer import RunConfig, RunOutcome, TrainerService

# Small enough that a full distillation run takes a few seconds
TOY_USERS = 40
TOY_ITEMS = 60
TOY_DENSITY = 0.12


@pytest.fixture
def streams() -> StreamFactory:
    """Stream factory with a fixed test seed."""
    return StreamFactory(1234)


@pytest.fixture
def rng() -> np.random.Generator:
    """Plain generator for building random test instances."""
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    """Filtered and chronologically split synthetic dataset."""
    log = generate_synthetic(TOY_USERS, TOY_ITEMS, latent_dim=8, density=TOY_DENSITY, seed=11)
    filtered, id_maps = preprocess(log, min_interactions=3)
    return chrono_split(filtered, id_maps)


@pytest.fixture
def dataset_dir(tmp_path: Path, toy_dataset: Dataset) -> Path:
    """The toy dataset saved as a snapshot directory."""
    return DatasetRepository(tmp_path / "data").save(toy_dataset)


@pytest.fixture
def fast_config() -> RunConfig:
    """Run config sized for the toy dataset."""
    return RunConfig(
        seed=5,
        d_teacher=16,
        d_student=4,
        batch_size=128,
        max_epochs=4,
        patience=10,
        n_experts=2,
        diagnostics_every=2,
        diagnostic_pairs=20,
        record_wall_time=False,
        lr=1e-2,
    )


@pytest.fixture(scope="session")
def teacher_outcome(toy_dataset: Dataset, tmp_path_factory) -> RunOutcome:
    """A d=16 MF teacher trained once for the whole session, saved under a temp dir."""
    config = RunConfig(
        seed=3,
        d_teacher=16,
        batch_size=128,
        max_epochs=6,
        patience=10,
        record_wall_time=False,
        lr=1e-2,
        out=tmp_path_factory.mktemp("teacher"),
    )
    return TrainerService().train_teacher(config, dataset=toy_dataset)
