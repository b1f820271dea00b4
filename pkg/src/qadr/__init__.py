"""Deterministic simulator and analytics toolkit for an anonymous
data-reporting protocol built on XOR aggregation of pad-masked slot vectors.

The package covers the full protocol (pairwise keying, iterative slot
reservation with collision resolution, parallel data submission, and a
single-round shuffle-based reservation variant) together with the exact
analytics that predict its behavior (collision-structure probabilities,
resolution-round distributions, anonymity-partition metrics, and closed-form
cost models), so simulation and theory can be cross-validated.
"""

from .core import (
    CollisionStructure,
    ConfigurationError,
    DimensionMismatch,
    ProtocolError,
    ProtocolParams,
    RoundTranscript,
    SlotVector,
    Srm,
    place_in_slot,
    xor_vectors,
)
from .keying import (
    KeyMode,
    KeySchedule,
    PadRequest,
    PairwiseKeyTable,
    establish_keys,
    establish_otp_pads,
    expand_pad,
    pair_pad,
)
from .reservation import (
    ReservationOutcome,
    ReservationStatus,
    ReservationTimeout,
    run_reservation,
)
from .submission import SubmissionResult, run_submission
from .shuffle import run_shuffle_reservation
from .combinatorics import (
    birthday_collision_probability,
    chain_probability,
    enumerate_structures,
    resolution_round_distribution,
    structure_probability,
)
from .anonymity import entropy_metrics, observe_partition, partition_information_gain
from .costs import CostReport, cost_report
from .harness import DEFAULT_MASTER_SEED, ExperimentConfig, run_scenario, run_session

__version__ = "0.1.0"
