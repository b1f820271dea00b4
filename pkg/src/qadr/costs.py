"""Closed-form cost and latency calculators for the three protocol variants.

All functions are pure and monotone non-decreasing in n. Costs are counted in
bits; latency in multiples of the network round-trip time tau.

The serial baseline ("APMT") transmits one message per protocol run, so
reporting from all n participants costs n sequential runs, a Theta(n^4)
secret-bit budget and Theta(n) latency. The parallel XOR protocol moves all n
messages at once: Theta(n^2) bandwidth and O(1) latency.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, log2
from typing import Optional

from .core import ConfigurationError

APMT_SERIAL = "apmt_serial_n_messages"
QADR_DEFAULT = "qadr_default"
QADR_SHUFFLE = "qadr_shuffle"
VARIANTS = (APMT_SERIAL, QADR_DEFAULT, QADR_SHUFFLE)

# One serial-baseline run spans five interactive sub-protocols
# (broadcast, veto, notification, collision detection, transmission).
APMT_ROUNDS_PER_RUN = 5

# Submission takes two round trips: masked submit, then broadcast-and-verify.
SUBMISSION_ROUND_TRIPS = 2


@dataclass(frozen=True)
class CostReport:
    """Resource figures for one variant at one parameter point."""

    variant: str
    bandwidth_bits: int
    key_bits: int
    rounds: int
    latency_units: float

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if min(self.bandwidth_bits, self.key_bits, self.rounds) < 0 or self.latency_units < 0:
            raise ConfigurationError("cost fields must be non-negative")


def apmt_single_run_cost(n: int, msg_len: int, beta: int) -> int:
    """Secret bits consumed by one serial-baseline run carrying one message
    of ``msg_len`` bits at security margin ``beta``.

    The log term is the bit-length of a counter over msg_len + 1 values,
    i.e. ceil(log2(msg_len + 1)).
    """
    if n < 2 or msg_len < 1:
        raise ConfigurationError("need n >= 2 and msg_len >= 1")
    if beta < 0:
        raise ConfigurationError("beta must be non-negative")
    counter_bits = ceil(log2(msg_len + 1))
    pairs = n * (n - 1) // 2
    return 2 * beta * n * n * (n - 1) + (msg_len + 2 * (counter_bits + beta)) * pairs


def apmt_serial_cost(n: int, msg_len: int, beta: int) -> int:
    """Effective cost of collecting one message from each of n participants:
    n sequential runs."""
    return n * apmt_single_run_cost(n, msg_len, beta)


def qadr_bandwidth(
    n: int, gamma: float | Fraction, rounds: int, l_srm: int, l_msg: int
) -> int:
    """Total bits transmitted: rounds * n * (gamma*n * l_srm) for reservation
    plus n * (n * l_msg) for submission."""
    if n < 1 or rounds < 0 or l_srm < 1 or l_msg < 1:
        raise ConfigurationError("invalid bandwidth parameters")
    slots = Fraction(gamma) * n
    if slots.denominator != 1 or slots < n:
        raise ConfigurationError(f"gamma * n must be an integer >= n, got {slots}")
    return rounds * n * int(slots) * l_srm + n * n * l_msg


def qadr_key_bits(n: int, rounds: int, lambda_bits: int, variant: str = QADR_DEFAULT) -> int:
    """Pairwise secret bits consumed across all key epochs.

    Default variant: one epoch for setup, one per reservation round, one for
    submission, i.e. (rounds + 2) * lambda * n(n-1)/2. Shuffle variant: setup
    and submission only, 2 * lambda * n(n-1)/2.
    """
    if n < 1 or rounds < 0 or lambda_bits < 1:
        raise ConfigurationError("invalid key parameters")
    pairs = n * (n - 1) // 2
    if variant == QADR_SHUFFLE:
        return 2 * lambda_bits * pairs
    if variant == QADR_DEFAULT:
        return (rounds + 2) * lambda_bits * pairs
    raise ConfigurationError(f"variant {variant!r} has no pairwise key budget")


def latency_model(
    n: int,
    variant: str,
    tau: float = 1.0,
    reservation_rounds: int = 3,
    submission_round_trips: int = SUBMISSION_ROUND_TRIPS,
    apmt_rounds_per_run: int = APMT_ROUNDS_PER_RUN,
) -> float:
    """Time-to-completion in round-trip units.

    Parallel variants finish in (reservation rounds + submission trips) * tau
    regardless of n; the shuffle variant's reservation is a single round. The
    serial baseline needs n runs of several interactive rounds each, hence
    latency linear in n.
    """
    if n < 1 or tau < 0:
        raise ConfigurationError("invalid latency parameters")
    if variant == APMT_SERIAL:
        return n * apmt_rounds_per_run * tau
    if variant == QADR_DEFAULT:
        return (reservation_rounds + submission_round_trips) * tau
    if variant == QADR_SHUFFLE:
        return (1 + submission_round_trips) * tau
    raise ConfigurationError(f"unknown variant {variant!r}")


def cost_report(
    variant: str,
    n: int,
    gamma: float | Fraction = 3,
    rounds: int = 3,
    l_srm: int = 256,
    l_msg: int = 1024,
    lambda_bits: int = 256,
    beta: int = 16,
    tau: float = 1.0,
) -> CostReport:
    """Full per-variant report at one parameter point.

    The serial baseline's bandwidth and key figures are both its secret-bit
    budget (that protocol's single accounted resource). The shuffle variant's
    bandwidth covers the submission stage; its reservation cost is counted in
    work units by the shuffle module, not bits.
    """
    if variant == APMT_SERIAL:
        bits = apmt_serial_cost(n, l_msg, beta)
        return CostReport(
            variant=variant,
            bandwidth_bits=bits,
            key_bits=bits,
            rounds=n * APMT_ROUNDS_PER_RUN,
            latency_units=latency_model(n, variant, tau),
        )
    if variant == QADR_DEFAULT:
        return CostReport(
            variant=variant,
            bandwidth_bits=qadr_bandwidth(n, gamma, rounds, l_srm, l_msg),
            key_bits=qadr_key_bits(n, rounds, lambda_bits, variant),
            rounds=rounds + SUBMISSION_ROUND_TRIPS,
            latency_units=latency_model(n, variant, tau, reservation_rounds=rounds),
        )
    if variant == QADR_SHUFFLE:
        return CostReport(
            variant=variant,
            bandwidth_bits=n * n * l_msg,
            key_bits=qadr_key_bits(n, rounds, lambda_bits, variant),
            rounds=1 + SUBMISSION_ROUND_TRIPS,
            latency_units=latency_model(n, variant, tau),
        )
    raise ConfigurationError(f"unknown variant {variant!r}")


def crossover_point(
    n_max: int = 512,
    gamma: float | Fraction = 3,
    rounds: int = 3,
    l_srm: int = 256,
    l_msg: int = 1024,
    beta: int = 16,
) -> Optional[int]:
    """Smallest n at which the serial baseline's n-message cost exceeds the
    parallel protocol's bandwidth, or None if it never does below n_max."""
    for n in range(2, n_max + 1):
        if apmt_serial_cost(n, l_msg, beta) > qadr_bandwidth(n, gamma, rounds, l_srm, l_msg):
            return n
    return None
