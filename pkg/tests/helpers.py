"""Shared generators and independent oracles for the test suite.

Every oracle here deliberately avoids the code paths it checks: statistics
are two-pass over raw slices, the clustering reference rescans member
pairs, and the matcher rescans the full candidate list each step.
"""

from __future__ import annotations

import datetime as dt
import math

import numpy as np

UTC = dt.timezone.utc

REGIME_SIGMAS = (1.0, 20.0, 60.0, 150.0)


def two_pass_stats(values) -> tuple[int, float, float]:
    """Direct mean and divide-by-n variance, no prefix machinery."""
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    mean = float(np.mean(x))
    d = x - mean
    return n, mean, float(np.dot(d, d) / n)


def brute_force_spectrum(z, a, b, min_len, variance_floor_ratio=1e-12):
    """Divergence at every admissible cursor via two-pass statistics.

    Per-position evaluation of the maximized log-likelihood ratio plus 1/2,
    computed as log P2(t) - log P1 from explicit Gaussian log-likelihoods.
    """
    zz = np.asarray(z, dtype=np.float64)
    n_tot = b - a + 1
    _, _, v_full = two_pass_stats(zz[a - 1 : b])
    floor = variance_floor_ratio * v_full

    def loglik(n, var):
        return -0.5 * n * (math.log(2 * math.pi * var)) - 0.5 * n

    log_p1 = loglik(n_tot, v_full)
    positions = []
    values = []
    for t in range(a + min_len - 1, b - min_len + 1):
        n_l, _, v_l = two_pass_stats(zz[a - 1 : t])
        n_r, _, v_r = two_pass_stats(zz[t:b])
        v_l = max(v_l, floor)
        v_r = max(v_r, floor)
        log_p2 = loglik(n_l, v_l) + loglik(n_r, v_r)
        positions.append(t)
        values.append(log_p2 - log_p1 + 0.5)
    return np.array(positions), np.array(values)


def piecewise_gaussian(lengths, sigmas, mus=None, seed=0):
    """Concatenated Gaussian segments; returns (z, true boundary cursors)."""
    rng = np.random.default_rng(seed)
    mus = mus if mus is not None else [0.0] * len(lengths)
    parts = [
        rng.normal(mu, sigma, n) for n, sigma, mu in zip(lengths, sigmas, mus)
    ]
    z = np.concatenate(parts)
    true_bounds = list(np.cumsum(lengths)[:-1])
    return z, true_bounds


def multi_regime_series(seed, target_n=50_000, min_len=200, max_len=2000):
    """Regime-switching series with sigma drawn from the four regime levels,
    consecutive segments always at different levels, total length ~target_n."""
    rng = np.random.default_rng(seed)
    lengths, sigmas = [], []
    prev = None
    while sum(lengths) < target_n:
        n = int(rng.integers(min_len, max_len + 1))
        choices = [s for s in REGIME_SIGMAS if s != prev]
        sigma = float(rng.choice(choices))
        lengths.append(n)
        sigmas.append(sigma)
        prev = sigma
    return piecewise_gaussian(lengths, sigmas, seed=seed + 10_000)


def brute_force_complete_link(dist):
    """O(M^3)-style reference: recompute max over member pairs each merge.

    Ids follow the production convention (leaves 0..M-1, new cluster ids
    appended in merge order) and ties break on the smallest (i, j) pair.
    """
    d = np.asarray(dist, dtype=np.float64)
    m = d.shape[0]
    clusters = {i: [i] for i in range(m)}
    merges = []
    next_id = m
    while len(clusters) > 1:
        best = None
        ids = sorted(clusters)
        for ii in range(len(ids)):
            for jj in range(ii + 1, len(ids)):
                i, j = ids[ii], ids[jj]
                dd = max(
                    d[x, y] for x in clusters[i] for y in clusters[j]
                )
                key = (dd, i, j)
                if best is None or key < best:
                    best = key
        dd, i, j = best
        merges.append((i, j, dd, len(clusters[i]) + len(clusters[j])))
        clusters[next_id] = clusters.pop(i) + clusters.pop(j)
        next_id += 1
    return merges


def brute_force_match(pos_a, pos_b, tolerance):
    """Rescan-the-matrix greedy matcher used as the comparison oracle."""
    pool = [
        (abs(x - y), min(x, y), max(x, y), x, y)
        for x in pos_a
        for y in pos_b
        if abs(x - y) <= tolerance
    ]
    used_a, used_b, matched = set(), set(), []
    while True:
        remaining = [
            c for c in pool if c[3] not in used_a and c[4] not in used_b
        ]
        if not remaining:
            break
        gap, _, _, x, y = min(remaining)
        used_a.add(x)
        used_b.add(y)
        matched.append((x, y, gap))
    matched.sort(key=lambda t: t[0])
    return matched


def make_bar_timestamps(n, start=dt.date(2006, 1, 2), bars_per_day=13):
    """Synthetic half-hourly bar-end instants, 13 per weekday session."""
    stamps = []
    day = start
    while len(stamps) < n:
        if day.weekday() < 5:
            open_dt = dt.datetime.combine(day, dt.time(9, 30), tzinfo=UTC)
            for k in range(1, bars_per_day + 1):
                stamps.append(open_dt + k * dt.timedelta(minutes=30))
                if len(stamps) == n:
                    break
        day += dt.timedelta(days=1)
    return stamps


def bars_csv_text(values, start=dt.date(2006, 1, 2)) -> str:
    stamps = make_bar_timestamps(len(values), start=start)
    lines = ["timestamp,value"]
    for ts, v in zip(stamps, values):
        lines.append(f"{ts.isoformat().replace('+00:00', 'Z')},{float(v)!r}")
    return "\n".join(lines) + "\n"


def regime_price_walk(seed=0, n=2000):
    """Positive price path from an exponentiated Gaussian log-walk with
    volatility regime switches; suitable for normal vs lognormal runs."""
    rng = np.random.default_rng(seed)
    n1, n2, n3 = n // 3, n // 3, n - 2 * (n // 3)
    steps = np.concatenate(
        [
            rng.normal(0, 0.001, n1),
            rng.normal(0, 0.02, n2),
            rng.normal(0, 0.004, n3),
        ]
    )
    log_prices = math.log(100.0) + np.cumsum(steps)
    return np.exp(log_prices)
