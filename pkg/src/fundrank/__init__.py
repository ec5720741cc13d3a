"""Stock ranking from quarterly fundamentals.

Per-stock regression models (feed-forward net, random forest,
Takagi-Sugeno fuzzy system) predict next-quarter relative returns; the
predictions rank a universe, drive top/bottom portfolios, and feed a
majority-vote consensus. See the CLI (`fundrank pipeline`) for the full
run shape.
"""

from .anfis import AnfisConfig, MembershipFunction, RuleBase
from .errors import FundrankError
from .evaluate import Portfolio, PortfolioReport, PredictionTable
from .feature_select import FeatureSubset
from .fnn import FnnConfig, FnnModel
from .ingest import BenchmarkSeries, RawRecord, StockSeries
from .model_core import TrainReport, TrainedModel, rmse
from .preprocess import Sample, SampleSet, StandardizationParams
from .quarters import Quarter
from .rf import FeatureImportance, Forest, RfConfig
from .synthetic import SynthConfig

__version__ = "0.1.0"

__all__ = [
    "AnfisConfig",
    "BenchmarkSeries",
    "FeatureImportance",
    "FeatureSubset",
    "FnnConfig",
    "FnnModel",
    "Forest",
    "FundrankError",
    "MembershipFunction",
    "Portfolio",
    "PortfolioReport",
    "PredictionTable",
    "Quarter",
    "RawRecord",
    "RfConfig",
    "RuleBase",
    "Sample",
    "SampleSet",
    "StandardizationParams",
    "StockSeries",
    "SynthConfig",
    "TrainReport",
    "TrainedModel",
    "rmse",
]
