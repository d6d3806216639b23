import time
from termite.t2parse import parse_t2
from termite.transform import preprocess, cutpoints
from termite.termination import prove_termination, prove_termination_disjunctive

ex0 = open("tests/corpus/ex0.t2").read()
nested = """
START: 0;
FROM: 0;
x := 10; y := 10;
TO: 1;
FROM: 1;
assume(x > 0);
TO: 2;
FROM: 2;
assume(y > 0);
y := y - 1;
TO: 2;
FROM: 2;
assume(y <= 0);
x := x - 1;
y := 10;
TO: 1;
"""

np = preprocess(parse_t2(nested))
print("cutpoints(nested):", cutpoints(np))

def show(label, fn, text):
    p = parse_t2(text)
    t0 = time.time()
    res = fn(p)
    dt = time.time() - t0
    kind = type(res).__name__
    extra = ""
    if kind == "Terminating":
        extra = str({c: [(str(rf.f), str(rf.bound)) for rf in rfs]
                     for c, rfs in res.argument.per_cutpoint.items()})
    elif kind == "Unknown":
        extra = repr(res.reason)
    print(f"{label}: {dt:.2f}s -> {kind} {extra}", flush=True)

show("ex0 lex", prove_termination, ex0)
show("ex0 disj", prove_termination_disjunctive, ex0)
show("nested lex", prove_termination, nested)
show("nested disj", prove_termination_disjunctive, nested)
