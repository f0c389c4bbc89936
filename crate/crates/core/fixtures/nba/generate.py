"""Rebuild the 2013-14 NBA free-throw fixture.

The per-player season totals behind the published table are not bundled
with the paper, so this script reconstructs a 461-player dataset that honours
every published fact about it and fills the rest by simulation. See
README.md in this directory for the list of constraints.

Usage: python3 generate.py   (writes nba_full.csv and nba_midseason.csv)
"""

import csv
import pathlib

import numpy as np
from scipy import optimize, special, stats

SEED = 20140416
A_PUB, B_PUB = 15.12, 5.38
N_PLAYERS = 461
TOTAL_Y, TOTAL_N = 43870, 58029
MEDIAN_N = 82
MAX_N = 805
MID_FRACTION = 0.42

NAMED = [
    ("Brian Roberts", 125, 133),
    ("Ryan Anderson", 59, 62),
    ("Mike Harris", 26, 27),
    ("J.J. Redick", 97, 106),
    ("Ray Allen", 105, 116),
    ("Mike Muscala", 14, 14),
    ("Dirk Nowitzki", 338, 376),
    ("Trey Burke", 102, 113),
    ("Reggie Jackson", 158, 177),
    ("Kevin Martin", 303, 340),
    ("Gary Neal", 94, 105),
    ("D.J. Augustin", 201, 227),
    ("Stephen Curry", 308, 348),
    ("Patty Mills", 73, 82),
    ("Courtney Lee", 99, 112),
    ("Steve Nash", 22, 24),
    ("Greivis Vasquez", 95, 108),
    ("Robbie Hummel", 15, 16),
    ("Mo Williams", 78, 89),
    ("Kevin Durant", 703, 805),
    ("Aaron Brooks", 83, 95),
    ("Damian Lillard", 371, 426),
    ("Nando de Colo", 31, 35),
]

# Players implied by gaps in the published FTP ranks (unk_01..unk_12)
# and posterior-mean ranks (unk_pm17..unk_pm25).
SLOTS = [
    ("unk_01", 57, 60),
    ("unk_02", 93, 100),
    ("unk_03", 11, 12),
    ("unk_04", 10, 11),
    ("unk_05", 10, 11),
    ("unk_06", 19, 21),
    ("unk_07", 19, 21),
    ("unk_08", 9, 10),
    ("unk_09", 8, 9),
    ("unk_10", 8, 9),
    ("unk_11", 7, 8),
    ("unk_12", 27, 31),
    ("unk_pm17", 659, 760),
    ("unk_pm20", 535, 620),
    ("unk_pm21", 483, 560),
    ("unk_pm23", 369, 430),
    ("unk_pm25", 282, 329),
]

# Published FTP rank, posterior-mean rank for each named player.
PUBLISHED_RANKS = {
    "Brian Roberts": (17, 1), "Ryan Anderson": (15, 2), "Mike Harris": (14, 15),
    "J.J. Redick": (22, 6), "Ray Allen": (25, 8), "Mike Muscala": (7, 34),
    "Dirk Nowitzki": (30, 5), "Trey Burke": (28, 9), "Reggie Jackson": (32, 11),
    "Kevin Martin": (33, 7), "Gary Neal": (31, 14), "D.J. Augustin": (38, 12),
    "Stephen Curry": (39, 10), "Patty Mills": (34, 19), "Courtney Lee": (40, 18),
    "Steve Nash": (20.5, 44), "Greivis Vasquez": (41, 22), "Robbie Hummel": (18, 55),
    "Mo Williams": (42, 24), "Kevin Durant": (45, 13), "Aaron Brooks": (44, 26),
    "Damian Lillard": (47, 16), "Nando de Colo": (37, 48),
}

# Twelve perfect records besides Muscala's 14/14; median of all 13 is 4.
PERFECT_N = [1, 1, 1, 2, 2, 3, 4, 4, 5, 6, 7, 7]

FTP_CAP = 371 / 426  # Lillard: every generated player shoots below him


def pm(y, n):
    return (y + A_PUB) / (n + A_PUB + B_PUB)


def check_slots():
    ftp = lambda y, n: y / n
    s = {k: (y, n) for k, y, n in SLOTS}
    assert 125 / 133 < ftp(*s["unk_01"]) < 59 / 62
    assert 22 / 24 < ftp(*s["unk_02"]) < 15 / 16
    assert ftp(*s["unk_03"]) == 22 / 24
    for k in ("unk_04", "unk_05"):
        assert 105 / 116 < ftp(*s[k]) < 97 / 106
    for k in ("unk_06", "unk_07"):
        assert 102 / 113 < ftp(*s[k]) < 105 / 116
    assert 338 / 376 < ftp(*s["unk_08"]) < 102 / 113
    for k in ("unk_09", "unk_10"):
        assert 31 / 35 < ftp(*s[k]) < 73 / 82
    assert 83 / 95 < ftp(*s["unk_11"]) < 78 / 89
    assert FTP_CAP < ftp(*s["unk_12"]) < 703 / 805
    assert 73 / 82 < pm(*s["unk_01"]) < 59 / 62 and pm(*s["unk_01"]) < pm(59, 62)
    assert pm(338, 376) < pm(*s["unk_02"]) < pm(59, 62)
    assert pm(99, 112) < pm(*s["unk_pm17"]) < pm(371, 426)
    for k in ("unk_pm20", "unk_pm21"):
        assert pm(95, 108) < pm(*s[k]) < pm(73, 82)
    assert pm(78, 89) < pm(*s["unk_pm23"]) < pm(95, 108)
    assert pm(83, 95) < pm(*s["unk_pm25"]) < pm(78, 89)
    for k in ("unk_pm17", "unk_pm20", "unk_pm21", "unk_pm23", "unk_pm25"):
        assert ftp(*s[k]) < FTP_CAP


def bb_negloglik(params, y, n):
    a, b = np.exp(params)
    return -np.sum(
        special.betaln(y + a, n - y + b) - special.betaln(a, b)
    )


def fit(y, n):
    start = np.log([10.0, 4.0])
    res = optimize.minimize(bb_negloglik, start, args=(y, n), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000})
    return np.exp(res.x)


def draw_generated(rng, count, n_total, a_g, b_g, rho, sdlog):
    """Attempts and makes for the simulated players."""
    z_theta = rng.standard_normal(count)
    z_n = rho * z_theta + np.sqrt(1 - rho * rho) * rng.standard_normal(count)
    theta = stats.beta.ppf(stats.norm.cdf(z_theta), a_g, b_g)
    n = np.exp(np.log(MEDIAN_N) + sdlog * z_n)
    n = np.clip(np.round(n * n_total / n.sum()), 1, MAX_N - 1).astype(int)
    u = rng.random(count)
    y = stats.binom.ppf(u, n, theta).astype(int)
    return theta, n, y, u


# Posterior-mean bands below Brooks (rank 26) fixed by the published
# PM.R column: Muscala 34, Nash 44, de Colo 48, Hummel 55. No fixed player
# falls inside them, so generated players fill every open rank.
PM_BANDS = [
    (pm(14, 14), pm(83, 95), 7),
    (pm(22, 24), pm(14, 14), 9),
    (pm(31, 35), pm(22, 24), 3),
    (pm(15, 16), pm(31, 35), 6),
]
PM_FLOOR = pm(15, 16)


def feasible(y, n, lo, hi):
    return 0 <= y < n and y / n < FTP_CAP and lo < pm(y, n) < hi


def place(y, n, lo, hi):
    """Closest make count to `y` whose posterior mean lies in (lo, hi)."""
    for d in range(n + 1):
        for c in (y - d, y + d):
            if feasible(c, n, lo, hi):
                return c
    return None


def assign_bands(n, y):
    """Per-player (lo, hi) posterior-mean bounds."""
    lo = np.zeros(len(n))
    hi = np.full(len(n), PM_FLOOR)
    order = np.argsort(-np.array([pm(a, b) for a, b in zip(y, n)]), kind="stable")
    k = 0
    for b_lo, b_hi, count in PM_BANDS:
        filled = 0
        while filled < count:
            i = order[k]
            k += 1
            c = place(int(y[i]), int(n[i]), b_lo, b_hi)
            if c is None:
                continue
            y[i], lo[i], hi[i] = c, b_lo, b_hi
            filled += 1
    for i in range(len(n)):
        if hi[i] == PM_FLOOR:
            y[i] = place(int(y[i]), int(n[i]), 0.0, PM_FLOOR)
    return lo, hi


def adjust_n(n, target_total, fixed_n, rng):
    """Hit the attempt total and the league median exactly."""
    n = n.copy()
    order = rng.permutation(len(n))
    k = 0
    while n.sum() != target_total:
        i = order[k % len(n)]
        k += 1
        step = 1 if n.sum() < target_total else -1
        if 1 <= n[i] + step < MAX_N and n[i] != MEDIAN_N and (n[i] + step) != MEDIAN_N:
            n[i] += step
    for _ in range(10_000):
        allv = np.sort(np.concatenate([n, fixed_n]))
        med = allv[(N_PLAYERS - 1) // 2]
        if med == MEDIAN_N:
            break
        # move the generated player closest to the median onto it and
        # compensate elsewhere to keep the total
        i = int(np.argmin(np.abs(n - MEDIAN_N) + (n == MEDIAN_N) * 10**6))
        delta = MEDIAN_N - n[i]
        n[i] = MEDIAN_N
        j = int(np.argmax(n)) if delta > 0 else int(np.argmax(np.where(n < MAX_N - 1 - abs(delta), n, -1)))
        n[j] -= delta
    return n


def adjust_y(n, y, lo, hi, target_total, rng):
    order = rng.permutation(len(n))
    k = 0
    guard = 0
    while y.sum() != target_total:
        guard += 1
        if guard > 10**7:
            raise RuntimeError("cannot reach make total")
        i = order[k % len(n)]
        k += 1
        c = y[i] + (1 if y.sum() < target_total else -1)
        if feasible(c, n[i], lo[i], hi[i]):
            y[i] = c
    return y


def build(a_g, b_g, rho, sdlog, seed=SEED):
    rng = np.random.default_rng(seed)
    fixed = NAMED + SLOTS + [(f"perfect_{k + 1:02d}", m, m) for k, m in enumerate(PERFECT_N)]
    fixed_y = np.array([r[1] for r in fixed])
    fixed_n = np.array([r[2] for r in fixed])
    count = N_PLAYERS - len(fixed)
    n_total = TOTAL_N - fixed_n.sum()
    y_total = TOTAL_Y - fixed_y.sum()
    theta, n, _, u = draw_generated(rng, count, n_total, a_g, b_g, rho, sdlog)
    n = adjust_n(n, n_total, fixed_n, rng)
    # makes for the final attempt counts, same uniforms
    y = stats.binom.ppf(u, n, theta).astype(int)
    lo, hi = assign_bands(n, y)
    y = adjust_y(n, y, lo, hi, y_total, rng)
    ids = [f"gen_{k + 1:03d}" for k in range(count)]
    players = fixed + list(zip(ids, y.tolist(), n.tolist()))
    return players


def summary(players):
    y = np.array([p[1] for p in players])
    n = np.array([p[2] for p in players])
    a, b = fit(y, n)
    return a, b, y, n


def tune():
    """Choose generating shapes and the attempts/ability coupling so the
    marginal ML fit of the full dataset lands on the published shapes."""
    def loss(v):
        a_g, b_g = np.exp(v[:2])
        rho = np.tanh(v[2])
        a, b, _, _ = summary(build(a_g, b_g, rho, 1.05))
        return (np.log(a / A_PUB)) ** 2 + (np.log(b / B_PUB)) ** 2

    best = optimize.minimize(loss, [np.log(12.0), np.log(4.6), 0.4], method="Nelder-Mead",
                             options={"xatol": 1e-4, "fatol": 1e-8, "maxiter": 200})
    a_g, b_g = np.exp(best.x[:2])
    return a_g, b_g, np.tanh(best.x[2])


def midseason(players, seed=SEED + 7):
    rng = np.random.default_rng(seed)
    out = []
    for pid, y, n in players:
        if pid == "Brian Roberts":
            out.append((pid, 18, 18))
            continue
        while True:
            m = rng.binomial(n, MID_FRACTION)
            if m >= 1:
                break
        ym = rng.hypergeometric(y, n - y, m)
        out.append((pid, int(ym), int(m)))
    return out


def write(path, players, note):
    with open(path, "w", newline="") as f:
        f.write(f"# {note}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "y", "n"])
        for pid, y, n in players:
            w.writerow([pid, y, n])


def main():
    check_slots()
    a_g, b_g, rho = tune()
    players = build(a_g, b_g, rho, 1.05)
    a, b, y, n = summary(players)
    assert len(players) == N_PLAYERS
    assert y.sum() == TOTAL_Y and n.sum() == TOTAL_N
    assert np.sort(n)[(N_PLAYERS - 1) // 2] == MEDIAN_N
    assert (y == n).sum() == 13
    assert n.max() == MAX_N
    ftp_rank = stats.rankdata(-y / n)
    pm_rank = stats.rankdata(-np.array([pm(a, b) for a, b in zip(y, n)]))
    for i, (pid, _, _) in enumerate(players):
        if pid in PUBLISHED_RANKS:
            assert (ftp_rank[i], pm_rank[i]) == PUBLISHED_RANKS[pid], pid
    here = pathlib.Path(__file__).parent
    write(here / "nba_full.csv", players,
          f"reconstructed 2013-14 season; generator seed {SEED}; see README.md")
    mid = midseason(players)
    write(here / "nba_midseason.csv", mid,
          f"reconstructed split at end of December 2013; seed {SEED + 7}; see README.md")
    print(f"generating shapes ({a_g:.4f}, {b_g:.4f}), rho {rho:.4f}")
    print(f"full-data fit ({a:.4f}, {b:.4f}); median n {np.median(n)}; perfect {(y == n).sum()}")


if __name__ == "__main__":
    main()
