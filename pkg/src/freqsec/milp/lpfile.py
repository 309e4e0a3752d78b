"""CPLEX-style LP text export (and a narrow reader for round-trip checks).

Written files carry the model's variable names (sanitised to the portable
LP character set) and coefficients at 17 significant digits, so external
MILP tools can re-solve the exact same model.
"""
from __future__ import annotations

import math
import re

from .model import BINARY, MilpModel

__all__ = ["export_lp_format", "import_lp_format"]

_KEYWORDS = {"minimize", "maximize", "min", "max", "subject", "to", "st",
             "bounds", "bound", "binaries", "binary", "bin", "general",
             "end", "free", "infinity", "inf", "obj"}


def _sanitize_names(names):
    out, used = [], set()
    for name in names:
        clean = re.sub(r"[^A-Za-z0-9_.]", "_", name)
        if not clean or not clean[0].isalpha():
            clean = "v_" + clean
        if clean.lower() in _KEYWORDS:
            clean = clean + "_"
        base = clean
        k = 1
        while clean in used:
            clean = f"{base}_{k}"
            k += 1
        used.add(clean)
        out.append(clean)
    return out


def _num(v: float) -> str:
    return f"{v:.17g}"


def _terms_text(indices, coeffs, names) -> str:
    parts = []
    for idx, c in zip(indices, coeffs):
        sign = "+" if c >= 0 else "-"
        parts.append(f"{sign} {_num(abs(c))} {names[idx]}")
    return " ".join(parts) if parts else f"+ 0 {names[0]}"


def _wrap(line: str, width: int = 200) -> str:
    if len(line) <= width:
        return line + "\n"
    out, cur = [], ""
    for tok in line.split(" "):
        if cur and len(cur) + len(tok) + 1 > width:
            out.append(cur)
            cur = " " + tok
        else:
            cur = tok if not cur else cur + " " + tok
    out.append(cur)
    return "\n".join(out) + "\n"


def export_lp_format(model: MilpModel) -> str:
    names = _sanitize_names([v.name for v in model.variables])
    lines = ["\\ LP model export\n", "Minimize\n"]
    obj_terms = [(i, c) for i, c in enumerate(model.objective) if c != 0.0]
    lines.append(_wrap(" obj: " + _terms_text([i for i, _ in obj_terms],
                                              [c for _, c in obj_terms], names)))
    lines.append("Subject To\n")
    cnames = _sanitize_names([c.name for c in model.constraints])
    for cname, con in zip(cnames, model.constraints):
        sense = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
        body = _terms_text(con.indices, con.coeffs, names)
        lines.append(_wrap(f" {cname}: {body} {sense} {_num(con.rhs)}"))
    lines.append("Bounds\n")
    for name, v in zip(names, model.variables):
        lo, hi = v.lower, v.upper
        if lo == -math.inf and hi == math.inf:
            lines.append(f" {name} free\n")
        elif lo == hi:
            lines.append(f" {name} = {_num(lo)}\n")
        else:
            lo_txt = "-infinity" if lo == -math.inf else _num(lo)
            hi_txt = "+infinity" if hi == math.inf else _num(hi)
            lines.append(f" {lo_txt} <= {name} <= {hi_txt}\n")
    binaries = [name for name, v in zip(names, model.variables) if v.kind == BINARY]
    if binaries:
        lines.append("Binaries\n")
        for name in binaries:
            lines.append(f" {name}\n")
    lines.append("End\n")
    return "".join(lines)


# -- narrow reader ----------------------------------------------------------

_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _is_number(tok: str) -> bool:
    return bool(_NUM_RE.match(tok)) or tok.lower() in ("inf", "infinity",
                                                       "-inf", "-infinity",
                                                       "+inf", "+infinity")


def _to_number(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "infinity", "+inf", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def _parse_terms(tokens, var_of):
    """Parse [sign] [coef] name sequences into {index: coef}."""
    terms: dict[int, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok == "+":
            pass
        elif tok == "-":
            sign = -sign
        elif _is_number(tok):
            coef = sign * _to_number(tok)
            sign = 1.0
        else:
            c = sign if coef is None else coef
            idx = var_of(tok)
            terms[idx] = terms.get(idx, 0.0) + c
            sign, coef = 1.0, None
    return terms


def import_lp_format(text: str) -> MilpModel:
    """Rebuild a model from LP text produced by :func:`export_lp_format`."""
    lines = [ln.split("\\")[0].rstrip() for ln in text.splitlines()]
    sections: dict[str, list[str]] = {}
    current = None
    for ln in lines:
        stripped = ln.strip()
        low = stripped.lower()
        if not stripped:
            continue
        if low in ("minimize", "min"):
            current = "objective"
            sections[current] = []
        elif low in ("subject to", "st", "s.t."):
            current = "constraints"
            sections[current] = []
        elif low in ("bounds", "bound"):
            current = "bounds"
            sections[current] = []
        elif low in ("binaries", "binary", "bin"):
            current = "binaries"
            sections[current] = []
        elif low == "end":
            current = None
        elif current is not None:
            sections[current].append(stripped)

    model = MilpModel()
    binaries = set()
    for ln in sections.get("binaries", []):
        binaries.update(ln.split())

    # variables are declared in Bounds order, which mirrors the source model
    for ln in sections.get("bounds", []):
        toks = ln.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            model.add_var(toks[0], -math.inf, math.inf)
        elif len(toks) == 3 and toks[1] == "=":
            v = _to_number(toks[2])
            model.add_var(toks[0], v, v)
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            name = toks[2]
            lo, hi = _to_number(toks[0]), _to_number(toks[4])
            if name in binaries:
                model.add_var(name, lo, hi, kind=BINARY)
            else:
                model.add_var(name, lo, hi)
        else:
            raise ValueError(f"unsupported bounds line: {ln!r}")

    def var_of(name: str) -> int:
        return model.var_index(name)

    obj_tokens = " ".join(sections.get("objective", [])).split()
    if obj_tokens and obj_tokens[0].lower().startswith("obj"):
        obj_tokens = obj_tokens[1:] if obj_tokens[0].endswith(":") else obj_tokens[2:]
    for idx, coef in _parse_terms(obj_tokens, var_of).items():
        model.set_objective_coeff(idx, coef)

    buffer: list[str] = []
    for ln in sections.get("constraints", []) + ["\x00flush:"]:
        if ":" in ln and buffer:
            _add_constraint_from_tokens(model, buffer, var_of)
            buffer = []
        buffer.append(ln)
    return model


def _add_constraint_from_tokens(model, lines, var_of):
    joined = " ".join(lines)
    name, _, body = joined.partition(":")
    toks = body.split()
    sense_pos = max((i for i, t in enumerate(toks) if t in ("<=", ">=", "=")),
                    default=-1)
    if sense_pos < 0:
        raise ValueError(f"constraint without sense: {joined!r}")
    sense = toks[sense_pos]
    rhs = _to_number(toks[sense_pos + 1])
    terms = _parse_terms(toks[:sense_pos], var_of)
    model.add_constraint(terms, sense, rhs, name=name.strip())
