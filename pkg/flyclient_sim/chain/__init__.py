from .builder import ChainBuilder, build_adversarial_fork, build_honest_chain
from .chain import Chain, ChainBranch, ChainError
from .header import (
    AnyHeader,
    DistilledHeader,
    EquihashStubEngine,
    EthashStubEngine,
    FormatError,
    Header,
    MockShaEngine,
    PowEngine,
    distilled_pow_digest,
    make_pow_engine,
)
from .rules import ConsensusRules, validate_transition
from .schedule import (
    DEFAULT_BITS,
    DifficultySchedule,
    FixedSchedule,
    LinearGrowthSchedule,
    RandomWalkSchedule,
    make_schedule,
    median_time,
    ratio_within,
)
from .storage import (
    chain_manifest,
    iter_header_records,
    load_chain,
    load_manifest,
    manifest_digest,
    read_branch_nodes,
    save_chain,
)

__all__ = [
    "ChainBuilder",
    "build_adversarial_fork",
    "build_honest_chain",
    "Chain",
    "ChainBranch",
    "ChainError",
    "AnyHeader",
    "DistilledHeader",
    "EquihashStubEngine",
    "EthashStubEngine",
    "FormatError",
    "Header",
    "MockShaEngine",
    "PowEngine",
    "distilled_pow_digest",
    "make_pow_engine",
    "ConsensusRules",
    "validate_transition",
    "DEFAULT_BITS",
    "DifficultySchedule",
    "FixedSchedule",
    "LinearGrowthSchedule",
    "RandomWalkSchedule",
    "make_schedule",
    "median_time",
    "ratio_within",
    "chain_manifest",
    "iter_header_records",
    "load_chain",
    "load_manifest",
    "manifest_digest",
    "read_branch_nodes",
    "save_chain",
]
