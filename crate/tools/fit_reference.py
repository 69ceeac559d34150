#!/usr/bin/env python3
"""Refit the per-jurisdiction inputs of data/reference_jurisdictions.csv.

The published tables give each jurisdiction's surveillance aggregates but
not its care-continuum composition or the split of undiagnosed people
between acute, chronic and AIDS. This script recovers those four numbers
per row by least squares against the published outcomes for that row:
the simulated aggregates (data/published/simulated_aggregates.csv), and
R_t, R_Awr, mean incidence reduction, chi_025 and chi_100
(data/published/cohort_outcomes.csv). The transmission multipliers are held
at the values in data/reference.toml; they were chosen by an outer
Nelder-Mead search over this same inner fit.

The model here is an independent NumPy transcription (matrix exponentials
instead of RK4) that mirrors the Rust calibration.

Usage:
    tools/fit_reference.py [--only NAME_PREFIX ...] [--max-nfev N] [--out CSV]

Needs numpy and scipy (and tomli before Python 3.11).
"""

import argparse
import csv
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

DATA = Path(__file__).resolve().parent.parent / "data"
DAYS_PER_MONTH = 30.4375
AGG_TOL = np.array([0.002, 0.002, 2.0, 0.002])


def load_config():
    c = tomllib.loads((DATA / "reference.toml").read_text())
    t, m, s = c["transmission_multipliers"], c["mortality_multipliers"], c["sensitivity"]
    return dict(
        sau=DAYS_PER_MONTH / c["progression"]["acute_duration_days"],
        sus=1 / (12 * c["progression"]["chronic_to_aids_years"]),
        tau=c["confirmation_delay_days"]["acute_chronic"] / DAYS_PER_MONTH,
        ts=c["confirmation_delay_days"]["aids"] / DAYS_PER_MONTH,
        kc=(s["care"]["acute"], s["care"]["chronic"], s["care"]["aids"]),
        ks=(s["self"]["acute"], s["self"]["chronic"], s["self"]["aids"]),
        nua=c["testing"]["nu_a"],
        nus=c["testing"]["nu_s"],
        beta=(m["chronic"], m["aids"], m["nocare"], m["art"], m["vls"]),
        alpha=(t["acute"], t["aids"], t["nocare"], t["art"], t["vls"]),
    )


def read_table(path):
    with open(path, newline="") as f:
        return {r["name"]: r for r in csv.DictReader(f)}


def calibrate(C, row, p):
    """Stage parameters from surveillance aggregates and p = (v, w, pA, pS).

    v is the virally suppressed share of the diagnosed, w the no-care share
    of the rest, pA and pS the acute and AIDS shares of the undiagnosed."""
    v, w, pa_d, ps_d = p
    aware = float(row["aware_fraction"])
    pvls, pnc, part = v * aware, w * (1 - v) * aware, (1 - w) * (1 - v) * aware
    und = 1 - aware
    pa, ps = pa_d * und, ps_d * und
    pu = und - pa - ps
    aa, as_, anc, aart, avls = C["alpha"]
    lam = float(row["lambda_bar_per_year"]) / 12
    care_t = anc * pnc + aart * part + avls * pvls
    lu = lam / (aa * pa + pu + as_ * ps + care_t)
    bu, bs, bnc, bart, bvls = C["beta"]
    mu = float(row["mu_bar_per_year"]) / 12
    care_m = bnc * pnc + bart * part + bvls * pvls
    ma = mu / (pa + bu * pu + bs * ps + care_m)
    ka, ku, ks = C["kc"]
    phi_u = float(row["phi_bar_per_month"]) / (ka * C["nua"] * pa_d + C["nus"] * ks * ps_d + ku * (1 - pa_d - ps_d))
    return dict(
        lam=np.array([aa * lu, lu, as_ * lu, lu * care_t / aware]),
        mu=np.array([ma, bu * ma, bs * ma, ma * care_m / aware]),
        phi=np.array([C["nua"] * phi_u, phi_u, C["nus"] * phi_u]),
        x0=np.array([pa, pu, ps, aware]),
        shares=(pnc, part, pvls),
    )


def detection(C, phi, g, x):
    out = []
    for k in range(3):
        t = C["tau"] if k < 2 else C["ts"]
        self_rate = 0.0 if phi[k] == 0 else 1 / (1 / ((1 + x) * phi[k]) + t)
        out.append(C["ks"][k] * g * self_rate + C["kc"][k] * (1 - g) * (1 + x) * phi[k])
    return np.array(out)


def augmented(C, cal, det):
    """Generator of (a, u, s, d, incidence, diagnoses, deaths, undiagnosed time)."""
    M = np.zeros((8, 8))
    M[0, :4] = cal["lam"]
    M[0, 0] -= C["sau"] + det[0] + cal["mu"][0]
    M[1, 0] = C["sau"]
    M[1, 1] = -(C["sus"] + det[1] + cal["mu"][1])
    M[2, 1] = C["sus"]
    M[2, 2] = -(det[2] + cal["mu"][2])
    M[3, :3] = det
    M[3, 3] = -cal["mu"][3]
    M[4, :4] = cal["lam"]
    M[5, :3] = det
    M[6, :4] = cal["mu"]
    M[7, :3] = 1
    return M


def aggregates(C, cal, years=3):
    E = expm(augmented(C, cal, detection(C, cal["phi"], 0, 0)) * 12)
    y = np.concatenate([cal["x0"], np.zeros(4)])
    out = []
    for _ in range(years):
        y1 = E @ y
        d, n = y1 - y, y1[:4].sum()
        out.append([d[4] / n, d[6] / n, 100 * y1[3] / n, d[5] / d[7]])
        y = y1
    return np.mean(out, axis=0)


def reproduction_numbers(C, cal):
    M = augmented(C, cal, detection(C, cal["phi"], 0, 0))[:4, :4]
    F = np.zeros((4, 4))
    F[0] = cal["lam"]
    K = F @ np.linalg.inv(F - M)
    return K[0, 0], K[0, 0] - K[0, 3]


def incidence(C, cal, g, x, horizon=120):
    M = augmented(C, cal, detection(C, cal["phi"], g, x))
    return (expm(M * horizon) @ np.concatenate([cal["x0"], np.zeros(4)]))[4]


def mean_reduction(C, cal, step=0.05):
    base = incidence(C, cal, 0, 0)
    grid = np.linspace(0, 1, round(1 / step) + 1)
    vals = [-(incidence(C, cal, g, x) - base) / base * 100 for g in grid for x in grid if g or x]
    return np.mean(vals)


def threshold(C, cal, g):
    base = incidence(C, cal, 0, 0)
    lo, hi = 0.0, 2.0
    if incidence(C, cal, g, 0) - base <= 0:
        return 0.0
    for _ in range(30):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if incidence(C, cal, g, mid) - base > 0 else (lo, mid)
    return hi


def unpack(z):
    s = 1 / (1 + np.exp(-np.asarray(z)))
    return [s[0], s[1], 0.2 * s[2], 0.4 * s[3]]


def pack(p):
    q = np.clip(np.array(p) / [1, 1, 0.2, 0.4], 1e-4, 1 - 1e-4)
    return np.log(q / (1 - q))


def residuals(z, C, row, agg, out):
    cal = calibrate(C, row, unpack(z))
    rt, ra = reproduction_numbers(C, cal)
    e = (aggregates(C, cal) - agg) / AGG_TOL
    # Flat inside the tolerance band, steep outside it.
    e = np.where(np.abs(e) < 0.85, 0.3 * e, np.sign(e) * (0.3 * 0.85 + 40 * (np.abs(e) - 0.85)))
    red = mean_reduction(C, cal)
    c25, c100 = 100 * threshold(C, cal, 0.25), 100 * threshold(C, cal, 1.0)
    head = [
        (rt - out["r_t"]) / out["r_t"] / 0.05,
        (ra - out["r_awr"]) / out["r_awr"] / 0.01,
        (red - out["pct_inc_red"]) / 0.15,
        (c25 - out["chi_025"]) / 0.3,
        (c100 - out["chi_100"]) / 0.4,
    ]
    return np.concatenate([head, e])


def current_p(row):
    aware = float(row["aware_fraction"])
    v = float(row["p_vls"]) / aware
    w = float(row["p_nocare"]) / (aware - float(row["p_vls"]))
    return [v, w, float(row["p_acute_given_unaware"]), float(row["p_aids_given_unaware"])]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--only", nargs="*", default=[])
    ap.add_argument("--max-nfev", type=int, default=150)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    C = load_config()
    rows = read_table(DATA / "reference_jurisdictions.csv")
    agg = read_table(DATA / "published" / "simulated_aggregates.csv")
    outcomes = read_table(DATA / "published" / "cohort_outcomes.csv")
    fitted = {}
    for name, row in rows.items():
        if args.only and not any(name.startswith(o) for o in args.only):
            continue
        target = np.array([float(agg[name][k]) for k in ("lambda_bar_per_year", "mu_bar_per_year", "aware_pct", "phi_bar_per_month")])
        out = {k: float(v) for k, v in outcomes[name].items() if k != "name"}
        z0 = pack(current_p(row))
        best = None
        for dz in ([0, 0, 0, 0], [0, 0, 0.5, 0.5], [0, 0, -0.5, -0.5]):
            s = least_squares(residuals, z0 + dz, args=(C, row, target, out), max_nfev=args.max_nfev, diff_step=1e-3)
            if best is None or s.cost < best.cost:
                best = s
        p = unpack(best.x)
        fitted[name] = p
        cal = calibrate(C, row, p)
        worst = np.abs((aggregates(C, cal) - target) / AGG_TOL).max()
        print(f"{name[:24]:24s} v {p[0]:.4f} w {p[1]:.4f} pA {p[2]:.4f} pS {p[3]:.4f}  worst aggregate {worst:.2f}x tol", flush=True)

    if args.out:
        fields = ["name", "lambda_bar_per_year", "mu_bar_per_year", "aware_fraction", "phi_bar_per_month",
                  "p_nocare", "p_art", "p_vls", "p_acute_given_unaware", "p_aids_given_unaware"]
        with open(args.out, "w", newline="") as f:
            wr = csv.writer(f, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
            wr.writerow(fields)
            for name, row in rows.items():
                if name in fitted:
                    pnc, _, pvls = calibrate(C, row, fitted[name])["shares"]
                    aware = float(row["aware_fraction"])
                    # Rounded shares; p_art takes the exact remainder so the
                    # shares sum to the aware fraction.
                    pnc, pvls = round(pnc, 6), round(pvls, 6)
                    part = round(aware - pnc - pvls, 12)
                    pa, ps = round(fitted[name][2], 6), round(fitted[name][3], 6)
                    wr.writerow([name, row["lambda_bar_per_year"], row["mu_bar_per_year"], row["aware_fraction"],
                                 row["phi_bar_per_month"], f"{pnc:.6f}", f"{part:.6f}", f"{pvls:.6f}", f"{pa:.6f}", f"{ps:.6f}"])
                else:
                    wr.writerow([row[k] for k in fields])


if __name__ == "__main__":
    main()
