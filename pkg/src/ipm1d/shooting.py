"""Outer problem: choose the stretching parameter A so that the profile's
root angle L(A) meets a target below pi/2.

Each evaluation of A -> L(A) is a full profile build, so the solver is plain
bisection (in log A): L(A) is only known to be continuous, and robustness
beats speed here.  Sweep evaluations are independent and run concurrently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, DomainError, ImpossibleTargetError
from .profile import continue_profile, local_profile

#: default search bracket for A
DEFAULT_BRACKET = (1e-3, 8.0)


@dataclass
class ShootingResult:
    target_L: float
    A_star: float
    achieved_L: float
    iterations: int
    sweep: list = field(default_factory=list)  # (A, L) pairs in eval order


def root_angle(A: float, *, n_seed: int = 64, rtol: float = 2.5e-14, atol: float = 1e-15) -> float:
    """L(A): first root of the stream function for the profile at A."""
    if A <= 0:
        raise DomainError("root_angle needs A > 0 (A = 0 never roots)")
    seed = local_profile(A, n_seed=n_seed)
    pair = continue_profile(seed, n=48, rtol=rtol, atol=atol, keep_trace=False)
    return pair.L


def sweep_root_angles(As, max_workers: int | None = None) -> list:
    """Evaluate L(A) over a parameter list, concurrently."""
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        Ls = list(pool.map(root_angle, As))
    return list(zip([float(a) for a in As], Ls))


def shoot(
    target_L: float,
    bracket: tuple = DEFAULT_BRACKET,
    *,
    tol_L: float = 1e-4,
    tol_A: float = 1e-10,
    max_iter: int = 200,
) -> ShootingResult:
    """Bisect A until L(A) lands in [target_L, target_L + tol_L).

    The map A -> L(A) is treated as monotone decreasing; the bracket must
    straddle the target (L at the small-A end above it, below at the large-A
    end).
    """
    if target_L >= np.pi / 2:
        raise ImpossibleTargetError(
            "root angles satisfy L < pi/2 structurally; target %.17g is unreachable"
            % target_L
        )
    if target_L <= 0:
        raise DomainError("target angle must be positive")
    a_lo, a_hi = float(bracket[0]), float(bracket[1])
    if not (0 < a_lo < a_hi):
        raise BracketError(f"bad bracket {bracket}")
    sweep = []

    def eval_L(a: float) -> float:
        L = root_angle(a)
        sweep.append((a, L))
        return L

    L_lo = eval_L(a_lo)
    L_hi = eval_L(a_hi)
    if L_lo < target_L or L_hi >= target_L:
        raise BracketError(
            f"bracket does not straddle the target: L({a_lo}) = {L_lo}, "
            f"L({a_hi}) = {L_hi}, target {target_L}"
        )
    a_good, L_good = a_lo, L_lo  # L >= target side
    a_bad = a_hi
    if L_good < target_L + tol_L:
        return ShootingResult(target_L, a_good, L_good, len(sweep), sweep)
    for _ in range(max_iter):
        if a_bad - a_good < tol_A:
            break
        mid = float(np.sqrt(a_good * a_bad))
        L_mid = eval_L(mid)
        if L_mid >= target_L:
            a_good, L_good = mid, L_mid
            if L_good < target_L + tol_L:
                break
        else:
            a_bad = mid
    return ShootingResult(
        target_L=target_L,
        A_star=a_good,
        achieved_L=L_good,
        iterations=len(sweep),
        sweep=sweep,
    )
