"""Tag-aware, regret-minimising allocation of billboard slots to advertisers."""

from .allocators import (
    SolveResult,
    SolverConfig,
    bg_solve,
    random_solve,
    rg_sample_size,
    rg_solve,
    rls_solve,
    solve,
    sort_advertisers,
)
from .estimators import (
    ExhaustiveAllocator,
    GreedyAllocator,
    LocalSearchAllocator,
    RandomAllocator,
    RandomizedGreedyAllocator,
)
from .generate import GeneratorParams, generate_instance, preset
from .influence import InfluenceEngine
from .instance_io import (
    ingest_csv,
    parse_allocation,
    read_instance,
    serialize_allocation,
    write_instance,
)
from .model import (
    Advertiser,
    Allocation,
    BillboardSlot,
    Instance,
    RegretReport,
    TagAffinity,
    TrajectoryRecord,
    allocation_is_feasible,
    validate_instance,
)
from .regret import RegretParams, advertiser_regret, total_regret
from .tags import AdaptiveTagSelector, aits

__version__ = "0.1.0"
