"""Attention-parametrized genetic algorithms with meta-evolved operators."""

from .bbob import TaskFamily, TaskSpec, sample_task
from .engine import GaConfig, GeneticAlgorithm, Trajectory, run
from .metabbo import MetaConfig, meta_fitness, meta_train
from .metaes import OpenAiEs
from .operators import ParentArchive
from .params import FeatureConfig, LgaParams
from .tasks import MlpTask, make_task

__all__ = [
    "FeatureConfig", "GaConfig", "GeneticAlgorithm", "LgaParams",
    "MetaConfig", "MlpTask", "OpenAiEs", "ParentArchive", "TaskFamily",
    "TaskSpec", "Trajectory", "make_task", "meta_fitness", "meta_train",
    "run", "sample_task",
]

__version__ = "0.1.0"
