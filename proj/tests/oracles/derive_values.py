"""Independent oracle for the frozen expected values in the C++ tests.

Recomputes each value from first principles (math module, regex tokenizer,
direct parsing of the fixture text) without touching the C++ code paths.
Run: python3 tests/oracles/derive_values.py
"""
import math
import pathlib
import re

HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures" / "sample_library"


def efe(prior, successes, uses, rel, explore=False, w=(1.0, 1.0, 1.0, 1.0)):
    s_hat = (successes + 1) / (uses + 2)
    g = -(w[0] * math.log(prior) + w[1] * math.log(s_hat) + w[2] * rel)
    if explore:
        g -= w[3] * 1.0 / (1 + uses)
    return g


def softmax(gs, tau):
    logits = [-g / tau for g in gs]
    m = max(logits)
    e = [math.exp(x - m) for x in logits]
    z = sum(e)
    return [x / z for x in e]


def words(text):
    return set(re.findall(r"[a-z0-9\x80-￿]+", text.lower()))


def fixture_fields(path):
    """Tiny independent reader: join marker + continuation lines per field."""
    fields, current = {}, None
    for line in path.read_text().splitlines():
        s = line.strip()
        m = re.match(r"^([!+])\s*([a-z-]+)\s*:(.*)$", s)
        if m:
            current = m.group(2)
            fields[current] = m.group(3)
        elif s.startswith("@") or not s:
            continue
        elif current:
            fields[current] += " " + s
    return {k: " ".join(v.split()) for k, v in fields.items()}


def jaccard(a, b):
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def main():
    print("G stub unused rel0       =", repr(efe(0.2, 0, 0, 0.0)))
    print("G settled unused rel0    =", repr(efe(0.9, 0, 0, 0.0)))
    print("G greenfield unused rel0 =", repr(efe(0.4, 0, 0, 0.0)))
    print("G active 3/4 rel0.25     =", repr(efe(0.8, 3, 4, 0.25)))
    print("G greenfield explore u=1 =", repr(efe(0.4, 0, 1, 0.0, explore=True)))
    print("softmax (1,2) tau=1      =", softmax([1.0, 2.0], 1.0))
    print("softmax (1,2) tau=0.01   =", softmax([1.0, 2.0], 0.01))
    print("softmax (0,1,3) tau=2    =", softmax([0.0, 1.0, 3.0], 2.0))

    blast = fixture_fields(FIXTURES / "blast-radius.arg")
    intent = "declare blast radius before risky change"
    a = words(intent)
    b = words(blast["conclusion"] + " " + blast["context"])
    print("blast intent tokens      =", sorted(a))
    print("blast doc tokens         =", sorted(b))
    print("shared                   =", sorted(a & b), "union", len(a | b))
    print("relevance blast intent   =", repr(jaccard(a, b)))
    summary_only = words(blast["conclusion"])
    print("relevance summary->doc   =", repr(jaccard(summary_only, b)))

    # tau update: tau0 * (1 + alpha*e) / (1 + beta*spread), clamped.
    lam, alpha, beta, tau0 = 0.2, 1.0, 1.0, 1.0
    e = (1 - lam) * 1.0 + lam * abs(200 - 100) / 100
    print("tau err_ewma=1 spread=0  =", tau0 * (1 + alpha * e) / (1 + beta * 0.0))
    # Three observations 100, 150, 50 from baseline 100; spread 0.5.
    e = 0.0
    for length in (100, 150, 50):
        e = (1 - lam) * e + lam * abs(length - 100) / 100
    print("ewma after 100,150,50    =", repr(e))
    print("tau after, spread 0.5    =", repr(min(5.0, max(0.05, tau0 * (1 + alpha * e) / (1 + beta * 0.5)))))
    gs = [1.0, 2.0, 3.0]
    mean = sum(gs) / 3
    sd = math.sqrt(sum((g - mean) ** 2 for g in gs) / 3)
    print("spread (1,2,3)           =", repr(sd / (abs(mean) + 1e-9)))


if __name__ == "__main__":
    main()
