"""``report.json`` serialization of a :class:`~gridstab.stability.StabilityReport`.

Field layout::

    case, ref_bus, lossless, radial, eps1, eps2
    balance            {bus, p_gen} or null
    critical_lines     [{from, to, is_critical, delta_deg, margin_deg, weights}]
    laplacian          n x n rows
    certificates
      lossless         {stable_for_all_td, by_corollary1, psd, simple_zero, eigenvalues} or null
      lossy_nofilter   {theorem3, lemma2, sym_eigenvalues}
    lemma3             {r_star, witness, d, note} or null
    symmetrizer        {exists, k_diag, psd, simple_zero} or null
    jacobian           [{td, stable, max_real, inertia, unstable_modes, eigenvalues}]

Reals carry 12 significant digits, complex numbers are ``[re, im]`` pairs and
infinity is the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .stability import StabilityReport


def num(x) -> float | str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.12g}")


def cnum(z) -> list:
    z = complex(z)
    return [num(z.real), num(z.imag)]


def _sorted_eigs(vals) -> list:
    vals = np.asarray(vals)
    order = np.lexsort((np.round(vals.imag, 12), np.round(vals.real, 12)))
    return [cnum(v) for v in vals[order]]


def report_to_dict(rep: StabilityReport) -> dict:
    crit = [
        {
            "from": s.from_bus,
            "to": s.to_bus,
            "is_critical": s.is_critical,
            "delta_deg": num(s.delta_deg),
            "margin_deg": num(s.margin_deg),
            "weights": [num(w) for w in s.weights],
        }
        for s in rep.critical.lines
    ]
    lossless = None
    if rep.lossless_cert is not None:
        c = rep.lossless_cert
        lossless = {
            "stable_for_all_td": c.stable_for_all_td,
            "by_corollary1": c.by_corollary1,
            "psd": c.laplacian_psd.psd,
            "simple_zero": c.laplacian_psd.simple_zero,
            "eigenvalues": [num(v) for v in c.laplacian_psd.eigenvalues],
        }
    nf = rep.nofilter_cert
    lemma3 = None
    if rep.lemma3 is not None:
        lemma3 = {
            "r_star": num(rep.lemma3.r_star),
            "witness": cnum(rep.lemma3.witness) if rep.lemma3.witness is not None else None,
            "d": num(rep.lemma3.d),
            "note": "unstable for any filter constant above r_star; criterion silent below",
        }
    sym = None
    if rep.symmetrizer is not None:
        s = rep.symmetrizer
        sym = {
            "exists": s.exists,
            "k_diag": [num(k) for k in s.k_diag],
            "psd": s.psd.psd if s.psd else None,
            "simple_zero": s.psd.simple_zero if s.psd else None,
        }
    jac = []
    for td, v in rep.verdicts.items():
        jac.append(
            {
                "td": num(td),
                "stable": v.stable,
                "max_real": num(v.max_real),
                "inertia": list(v.inertia),
                "unstable_modes": _sorted_eigs(v.unstable_modes),
                "eigenvalues": _sorted_eigs(v.eigenvalues),
            }
        )
    return {
        "case": rep.case_name,
        "ref_bus": rep.ref_bus,
        "lossless": rep.lossless,
        "radial": rep.radial,
        "eps1": num(rep.eps1),
        "eps2": num(rep.eps2),
        "balance": None if rep.balance_bus is None else {"bus": rep.balance_bus, "p_gen": num(rep.balance_value)},
        "critical_lines": crit,
        "laplacian": [[num(v) for v in row] for row in rep.laplacian],
        "certificates": {
            "lossless": lossless,
            "lossy_nofilter": {
                "theorem3": nf.theorem3,
                "lemma2": nf.lemma2,
                "sym_eigenvalues": [num(v) for v in nf.sym_psd.eigenvalues],
            },
        },
        "lemma3": lemma3,
        "symmetrizer": sym,
        "jacobian": jac,
    }


def write_report(rep: StabilityReport, path: Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(rep), indent=2) + "\n")
