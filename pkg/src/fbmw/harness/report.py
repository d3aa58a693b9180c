"""CSV and plain-text reports for rate fits and verification suites."""

from __future__ import annotations

import csv
import os

RATES_HEADER = ("T", "mean", "stderr", "n")
FIT_HEADER = ("slope", "stderr", "theory_exponent", "regime", "pass")


def fmt(x) -> str:
    return format(float(x), ".17g")


def _open(path):
    return open(path, "w", encoding="utf-8", newline="")


def write_rates(fits, path) -> None:
    """Per-horizon rows of every fit, in fit order."""
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATES_HEADER)
        for f in fits:
            for T, m, se, n in zip(f.T, f.means, f.stderrs, f.counts):
                w.writerow((fmt(T), fmt(m), fmt(se), int(n)))


def write_fits(fits, path) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIT_HEADER)
        for f in fits:
            w.writerow((fmt(f.slope), fmt(f.stderr), fmt(f.theory_exponent), f.law.regime,
                        "true" if f.passed else "false"))


def summary_lines(fits, suites) -> list:
    out = []
    for f in fits:
        flag = "PASS" if f.passed else "FAIL"
        log = f" (log T)^{f.law.log_power}" if f.law.log_power else ""
        out.append(f"{flag}  {f.label or 'fit'}: slope {f.slope:.6g} +- {f.stderr:.3g}, "
                   f"theory T^{f.law.exponent}{log} ({f.law.regime}, {f.law.normalization}), "
                   f"tolerance {f.tolerance:.6g}")
    for s in suites:
        out.extend(s.lines())
    return out


def emit_report(fits, suites, out_path) -> dict:
    """Write rates.csv, fit.csv and summary.txt into ``out_path``; returns the file paths."""
    fits = list(fits)
    suites = list(suites)
    os.makedirs(out_path, exist_ok=True)
    paths = {k: os.path.join(out_path, k) for k in ("rates.csv", "fit.csv", "summary.txt")}
    write_rates(fits, paths["rates.csv"])
    write_fits(fits, paths["fit.csv"])
    with _open(paths["summary.txt"]) as fh:
        for line in summary_lines(fits, suites):
            fh.write(line + "\n")
    return paths


def read_fits(path) -> list:
    """Rows of fit.csv as dicts with floats and a boolean ``pass``."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("slope", "stderr", "theory_exponent"):
            r[k] = float(r[k])
        r["pass"] = r["pass"] == "true"
    return rows
