"""Report assembly shared by the command line and the acceptance runner."""

import itertools
import json
from fractions import Fraction

from . import __version__
from .coeff import RatFunc
from .gradients import Finding

SCHEMA = 1


def jsonable(x):
    """Plain JSON data: RatFunc and Fraction become strings, tuples lists."""
    if isinstance(x, (RatFunc, Fraction)):
        return str(x)
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    if hasattr(x, "to_json"):
        return jsonable(x.to_json())
    return str(x)


def dumps(obj):
    """Deterministic serialization; parsing and re-dumping is byte-identical."""
    return json.dumps(jsonable(obj), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def _finding_key(f):
    return (f.statement, f.status, f.ref)


class Report:
    def __init__(self, command, mode, findings=(), data=None, text="", latex=""):
        self.command = list(command)
        self.mode = mode
        self.findings = sorted(findings, key=_finding_key)
        self.data = data if data is not None else {}
        self.text = text
        self.latex = latex

    @property
    def refuted(self):
        return [f for f in self.findings if f.status == "refuted"]

    def exit_code(self):
        return 1 if self.refuted else 0

    def to_json(self):
        return {"schema": SCHEMA,
                "engine": {"name": "ckt_prolong", "version": __version__},
                "command": self.command, "mode": self.mode,
                "findings": [f.to_json() for f in self.findings],
                "data": self.data}

    def render(self, fmt):
        if fmt == "json":
            return dumps(self.to_json())
        if fmt == "latex":
            return self.to_latex()
        return self.to_text()

    def to_text(self):
        lines = ["$ ckt-prolong " + " ".join(self.command)]
        if self.text:
            lines.append(self.text)
        if self.findings:
            lines.append("findings:")
            for f in self.findings:
                lines.append("  [%s] %s" % (f.status, f.statement))
                if f.status == "paper-discrepancy":
                    for k in ("paper", "engine"):
                        if k in f.payload:
                            lines.append("      %s: %s" % (k, _short(f.payload[k])))
        return "\n".join(lines) + "\n"

    def to_latex(self):
        body = ["\\section*{%s}" % latex_text("ckt-prolong " + " ".join(self.command))]
        if self.latex:
            body.append(self.latex)
        if self.findings:
            body.append("\\begin{itemize}")
            for f in self.findings:
                body.append("\\item \\textbf{%s}: %s" % (latex_text(f.status), latex_text(f.statement)))
                if f.status == "paper-discrepancy":
                    body.append(verbatim("\n".join("%s: %s" % (k, _short(f.payload[k]))
                                                    for k in ("paper", "engine") if k in f.payload)))
            body.append("\\end{itemize}")
        return standalone("\n".join(body))


def _short(v):
    s = v if isinstance(v, str) else json.dumps(jsonable(v), sort_keys=True, ensure_ascii=False)
    return s if len(s) < 400 else s[:400] + " ..."


def standalone(body):
    return ("\\documentclass{article}\n\\usepackage{amsmath,amssymb}\n"
            "\\usepackage[margin=2cm]{geometry}\n\\allowdisplaybreaks\n"
            "\\begin{document}\n" + body + "\n\\end{document}\n")


_GREEK = {"α": "alpha", "β": "beta", "γ": "gamma", "δ": "delta", "ε": "epsilon",
          "θ": "theta", "λ": "lambda", "μ": "mu", "ν": "nu", "ρ": "rho", "σ": "sigma",
          "τ": "tau", "φ": "phi", "ψ": "psi", "ω": "omega", "Δ": "Delta", "Λ": "Lambda",
          "∇": "nabla", "⊕": "oplus", "⊗": "otimes", "∘": "circ", "∈": "in", "→": "to",
          "∼": "sim", "≠": "neq", "·": "cdot", "∑": "sum", "∂": "partial"}
_SCRIPTS = {"₀": "_0", "₁": "_1", "₂": "_2", "₃": "_3", "⁰": "^0", "¹": "^1", "²": "^2",
            "³": "^3", "⁴": "^4"}
_ASCII = {"\\": "\\textbackslash{}", "_": "\\_", "^": "\\^{}", "{": "\\{", "}": "\\}",
          "#": "\\#", "%": "\\%", "&": "\\&", "$": "\\$", "~": "\\textasciitilde{}",
          "<": "\\textless{}", ">": "\\textgreater{}", "|": "\\textbar{}"}


def latex_text(s):
    """Escape a plain-text statement for LaTeX text mode; runs of symbols
    share one math group."""
    pieces = []             # (is_math, text)
    for ch in s:
        if ch in _GREEK:
            pieces.append((True, "\\%s " % _GREEK[ch]))
        elif ch in _SCRIPTS:
            pieces.append((True, "{}%s " % _SCRIPTS[ch]))
        elif ch == "−":
            pieces.append((False, "-"))
        elif ch == "̂":
            pieces.append((False, "\\^{}"))
        elif ch in _ASCII:
            pieces.append((False, _ASCII[ch]))
        elif ord(ch) < 128:
            pieces.append((False, ch))
        else:
            pieces.append((False, "[U+%04X]" % ord(ch)))
    out = []
    for is_math, group in itertools.groupby(pieces, key=lambda p: p[0]):
        text = "".join(t for _, t in group)
        out.append("$%s$" % text.strip() if is_math else text)
    return "".join(out)


def ascii_text(s):
    """ASCII rendering of a Unicode statement, for verbatim blocks."""
    out = []
    for ch in s:
        if ch in _GREEK:
            out.append(_GREEK[ch] if ch.isalpha() or ch == "∇" else " %s " % _GREEK[ch])
        elif ch in _SCRIPTS:
            out.append(_SCRIPTS[ch])
        elif ch == "−":
            out.append("-")
        elif ch == "̂":
            out.append("^")
        elif ord(ch) < 128:
            out.append(ch)
        else:
            out.append("[U+%04X]" % ord(ch))
    return "".join(out)


def verbatim(text):
    return "\\begin{verbatim}\n" + ascii_text(text).replace("\\end{verbatim}", "") + "\n\\end{verbatim}"


def finding(statement, ok, ref, payload=None, good="verified"):
    return Finding(statement, good if ok else "refuted", ref, payload)
