"""Discrete-event simulation of proof-of-work currencies, their attacks and defenses."""

from .chain import Block, BlockTree, ReorgReport, Transaction, confirmations, detect_conflicts, fork_statistics
from .economics import CoinSpec, HashMarket, PriceModel, preset, reward_at
from .mining import Difficulty, MinerActor, PoolActor
from .network import LatencyModel, PeerGraph, calibrate_lognormal
from .sim import EventKind, RngStreams, Simulator
from .world import DefenseConfig, World

__version__ = "0.1.0"
