"""Composable covariance functions.

A kernel is an immutable expression tree.  Leaves are elementary covariance
functions (RBF, Matern 3/2, Matern 5/2, Periodic, Constant, Noise); interior
nodes are Sum, Product and Scale.  Every positive hyperparameter is exposed in
the log domain through a flat :class:`HyperVector`, so gradient-based
optimization is unconstrained.

Inputs may be single-channel (a plain time coordinate) or two-channel pairs
``(warped, original)``.  Each leaf carries a channel selector; trend leaves
read the warped channel while seasonal leaves can be pinned to the original
one with the ``@orig`` marker of the expression grammar:

    c1 * rbf(l1) * periodic(p, l2)@orig + c2 * matern32(l3) + noise(s)

Bare numbers or identifiers in call position are hyperparameter initial
values (identifiers default to 1.0 and name the parameter).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    HyperDimensionError,
    KernelError,
    KernelParseError,
    MissingChannelError,
)

WARPED = "warped"
ORIGINAL = "original"

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)


# ---------------------------------------------------------------------------
# expression tree


@dataclass(frozen=True)
class Kernel:
    """Base node; supports ``+`` and ``*`` composition."""

    def __add__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        return Sum((self, other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        if not isinstance(other, Kernel):
            return NotImplemented
        return Product((self, other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        return NotImplemented


@dataclass(frozen=True)
class RBF(Kernel):
    l: float = 1.0
    channel: str = WARPED
    labels: tuple = ()


@dataclass(frozen=True)
class Matern32(Kernel):
    l: float = 1.0
    channel: str = WARPED
    labels: tuple = ()


@dataclass(frozen=True)
class Matern52(Kernel):
    l: float = 1.0
    channel: str = WARPED
    labels: tuple = ()


@dataclass(frozen=True)
class Periodic(Kernel):
    p: float = 1.0
    l: float = 1.0
    channel: str = WARPED
    labels: tuple = ()


@dataclass(frozen=True)
class Constant(Kernel):
    c: float = 1.0
    labels: tuple = ()


@dataclass(frozen=True)
class Noise(Kernel):
    s2: float = 1.0
    labels: tuple = ()


@dataclass(frozen=True)
class Sum(Kernel):
    children: tuple = ()


@dataclass(frozen=True)
class Product(Kernel):
    children: tuple = ()


@dataclass(frozen=True)
class Scale(Kernel):
    c: float
    child: Kernel = None
    labels: tuple = ()


_LEAF_PARAMS = {
    RBF: ("l",),
    Matern32: ("l",),
    Matern52: ("l",),
    Periodic: ("p", "l"),
    Constant: ("c",),
    Noise: ("s2",),
    Scale: ("c",),
}

_LEAF_NAMES = {
    RBF: "rbf",
    Matern32: "matern32",
    Matern52: "matern52",
    Periodic: "periodic",
    Constant: "const",
    Noise: "noise",
    Scale: "scale",
}


# ---------------------------------------------------------------------------
# hyperparameter vector


@dataclass(frozen=True)
class HyperVector:
    """Flat log-domain view of every free hyperparameter in a kernel."""

    names: tuple
    log_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "log_values", np.asarray(self.log_values, dtype=float)
        )
        if len(self.names) != self.log_values.size:
            raise HyperDimensionError(
                f"{len(self.names)} names for {self.log_values.size} values"
            )

    def __len__(self):
        return self.log_values.size

    @property
    def values(self):
        return np.exp(self.log_values)

    def replace_log(self, log_values):
        return HyperVector(self.names, np.asarray(log_values, dtype=float))


def _walk_params(k, out, counter):
    """Preorder traversal collecting (name, natural value) pairs."""
    t = type(k)
    if t in (Sum, Product):
        for c in k.children:
            _walk_params(c, out, counter)
        return
    if t is Scale:
        params = ("c",)
        values = (k.c,)
    else:
        params = _LEAF_PARAMS[t]
        values = tuple(getattr(k, p) for p in params)
    idx = counter[0]
    counter[0] += 1
    for j, (p, v) in enumerate(zip(params, values)):
        label = k.labels[j] if j < len(k.labels) and k.labels[j] else None
        name = label if label else f"k{idx}.{_LEAF_NAMES[t]}.{p}"
        out.append((name, v))
    if t is Scale:
        _walk_params(k.child, out, counter)


def hyper_vector(k):
    """Flatten a kernel's stored parameter values into a HyperVector."""
    out = []
    _walk_params(k, out, [0])
    names = []
    seen = {}
    for name, _ in out:
        if name in seen:
            seen[name] += 1
            name = f"{name}#{seen[name]}"
        else:
            seen[name] = 0
        names.append(name)
    values = np.array([v for _, v in out], dtype=float)
    if np.any(values <= 0.0):
        raise KernelError("all hyperparameters must be strictly positive")
    return HyperVector(tuple(names), np.log(values))


def n_params(k):
    out = []
    _walk_params(k, out, [0])
    return len(out)


def apply_hyper(k, theta):
    """Rebuild the tree with leaf values taken from ``theta`` (unflatten)."""
    _check_theta(k, theta)
    values = theta.values if isinstance(theta, HyperVector) else np.exp(theta)
    cursor = [0]

    def rebuild(node):
        t = type(node)
        if t in (Sum, Product):
            return t(tuple(rebuild(c) for c in node.children))
        if t is Scale:
            c = values[cursor[0]]
            cursor[0] += 1
            return Scale(c, rebuild(node.child), labels=node.labels)
        params = _LEAF_PARAMS[t]
        taken = values[cursor[0] : cursor[0] + len(params)]
        cursor[0] += len(params)
        kw = dict(zip(params, taken))
        if t in (RBF, Matern32, Matern52, Periodic):
            kw["channel"] = node.channel
        return t(labels=node.labels, **kw)

    return rebuild(k)


def _check_theta(k, theta):
    m = n_params(k)
    size = len(theta) if isinstance(theta, HyperVector) else np.size(theta)
    if size != m:
        raise HyperDimensionError(
            f"kernel has {m} hyperparameters, theta has {size}"
        )


# ---------------------------------------------------------------------------
# evaluation

def as_channels(x):
    """Normalize an input to (warped, original_or_None) 1-d arrays."""
    if isinstance(x, tuple):
        w, o = x
        w = np.atleast_1d(np.asarray(w, dtype=float))
        o = np.atleast_1d(np.asarray(o, dtype=float))
        if w.shape != o.shape:
            raise KernelError("warped and original channels differ in length")
        return w, o
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return x, None


def _select(channel, w, o):
    if channel == WARPED:
        return w
    if o is None:
        raise MissingChannelError(
            "kernel references the original channel but input is single-channel"
        )
    return o


def _compute(node, aw, ao, bw, bo, logv, cursor, same_index, want_h, want_i):
    """Recursive evaluation returning (K, hyper_grads list, input_grad)."""
    t = type(node)
    shape = (aw.size, bw.size)

    if t is Sum:
        K = np.zeros(shape)
        H = [] if want_h else None
        G = np.zeros(shape) if want_i else None
        for c in node.children:
            Kc, Hc, Gc = _compute(
                c, aw, ao, bw, bo, logv, cursor, same_index, want_h, want_i
            )
            K += Kc
            if want_h:
                H.extend(Hc)
            if want_i:
                G += Gc
        return K, H, G

    if t is Product:
        parts = [
            _compute(c, aw, ao, bw, bo, logv, cursor, same_index, want_h, want_i)
            for c in node.children
        ]
        Ks = [p[0] for p in parts]
        m = len(Ks)
        # prefix/suffix products avoid dividing by (possibly zero) factors
        prefix = [np.ones(shape)]
        for Kc in Ks[:-1]:
            prefix.append(prefix[-1] * Kc)
        suffix = [np.ones(shape)]
        for Kc in reversed(Ks[1:]):
            suffix.append(suffix[-1] * Kc)
        suffix.reverse()
        K = prefix[-1] * Ks[-1]
        H = [] if want_h else None
        G = np.zeros(shape) if want_i else None
        for j, (Kc, Hc, Gc) in enumerate(parts):
            rest = prefix[j] * suffix[j]
            if want_h:
                H.extend(h * rest for h in Hc)
            if want_i:
                G += Gc * rest
        return K, H, G

    if t is Scale:
        c = math.exp(logv[cursor[0]])
        cursor[0] += 1
        Kc, Hc, Gc = _compute(
            node.child, aw, ao, bw, bo, logv, cursor, same_index, want_h, want_i
        )
        K = c * Kc
        H = ([K.copy()] + [c * h for h in Hc]) if want_h else None
        G = c * Gc if want_i else None
        return K, H, G

    if t is Constant:
        c = math.exp(logv[cursor[0]])
        cursor[0] += 1
        K = np.full(shape, c)
        H = [K.copy()] if want_h else None
        G = np.zeros(shape) if want_i else None
        return K, H, G

    if t is Noise:
        s2 = math.exp(logv[cursor[0]])
        cursor[0] += 1
        K = np.zeros(shape)
        if same_index:
            if shape[0] != shape[1]:
                raise KernelError("same_index requires square evaluation")
            np.fill_diagonal(K, s2)
        H = [K.copy()] if want_h else None
        G = np.zeros(shape) if want_i else None
        return K, H, G

    # stationary leaves on a selected channel
    a = _select(node.channel, aw, ao)
    b = _select(node.channel, bw, bo)
    d = a[:, None] - b[None, :]
    on_warped = node.channel == WARPED

    if t is RBF:
        l = math.exp(logv[cursor[0]])
        cursor[0] += 1
        K = np.exp(-0.5 * (d / l) ** 2)
        H = [K * d * d / (l * l)] if want_h else None
        G = (-(d / (l * l)) * K if on_warped else np.zeros(shape)) if want_i else None
        return K, H, G

    if t is Matern32:
        l = math.exp(logv[cursor[0]])
        cursor[0] += 1
        r = np.abs(d)
        e = np.exp(-SQRT3 * r / l)
        K = (1.0 + SQRT3 * r / l) * e
        H = [(3.0 * r * r / (l * l)) * e] if want_h else None
        G = (
            (-(3.0 * d / (l * l)) * e if on_warped else np.zeros(shape))
            if want_i
            else None
        )
        return K, H, G

    if t is Matern52:
        l = math.exp(logv[cursor[0]])
        cursor[0] += 1
        r = np.abs(d)
        tt = SQRT5 * r / l
        e = np.exp(-tt)
        K = (1.0 + tt + tt * tt / 3.0) * e
        H = [(5.0 * r * r / (3.0 * l * l)) * (1.0 + tt) * e] if want_h else None
        G = (
            (
                -(5.0 * d / (3.0 * l * l)) * (1.0 + tt) * e
                if on_warped
                else np.zeros(shape)
            )
            if want_i
            else None
        )
        return K, H, G

    if t is Periodic:
        p = math.exp(logv[cursor[0]])
        l = math.exp(logv[cursor[0] + 1])
        cursor[0] += 2
        u = math.pi * d / p
        s = np.sin(u)
        K = np.exp(-2.0 * s * s / (l * l))
        if want_h:
            s2u = np.sin(2.0 * u)
            Hp = K * (2.0 * math.pi * d / (p * l * l)) * s2u
            Hl = K * 4.0 * s * s / (l * l)
            H = [Hp, Hl]
        else:
            H = None
        if want_i:
            G = (
                -K * (2.0 * math.pi / (p * l * l)) * np.sin(2.0 * u)
                if on_warped
                else np.zeros(shape)
            )
        else:
            G = None
        return K, H, G

    raise KernelError(f"unknown kernel node {t!r}")


def _log_values(theta):
    if isinstance(theta, HyperVector):
        return theta.log_values
    return np.asarray(theta, dtype=float)


def gram(k, A, B, theta, *, same_index=False):
    """Covariance matrix {k(a_i, b_j)}.

    With ``same_index=True`` A and B are treated as the same ordered
    observation set and Noise leaves contribute to the diagonal.
    """
    _check_theta(k, theta)
    aw, ao = as_channels(A)
    bw, bo = as_channels(B)
    K, _, _ = _compute(
        k, aw, ao, bw, bo, _log_values(theta), [0], same_index, False, False
    )
    return K


def gram_with_grads(k, A, B, theta, *, same_index=False, hyper=True, inputs=True):
    """Gram matrix plus requested derivative matrices.

    Returns (K, H, G): H is a (m, n, n) stack of dK/d(log theta_j); G is the
    matrix of dk(a_i, b_j)/d(warped coordinate of a_i).
    """
    _check_theta(k, theta)
    aw, ao = as_channels(A)
    bw, bo = as_channels(B)
    K, H, G = _compute(
        k, aw, ao, bw, bo, _log_values(theta), [0], same_index, hyper, inputs
    )
    if hyper:
        H = np.stack(H) if H else np.zeros((0,) + K.shape)
    return K, H, G


def eval_kernel(k, a, b, theta, *, same_index=False):
    """Scalar covariance k(a, b; theta)."""
    return float(gram(k, a, b, theta, same_index=same_index)[0, 0])


def grad_kernel_hyper(k, a, b, theta):
    """dk/d(log theta_j) at a single pair of points."""
    _, H, _ = gram_with_grads(k, a, b, theta, hyper=True, inputs=False)
    return H[:, 0, 0].copy()


def grad_kernel_input(k, a, b, theta):
    """dk/d(warped coordinate of a) at a single pair of points."""
    _, _, G = gram_with_grads(k, a, b, theta, hyper=False, inputs=True)
    return float(G[0, 0])


def noise_variances(k, X, theta):
    """Per-point noise variance contributed by Noise leaves."""
    with_noise = gram(k, X, X, theta, same_index=True)
    without = gram(k, X, X, theta, same_index=False)
    return np.diag(with_noise - without).copy()


# ---------------------------------------------------------------------------
# expression grammar

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[@+*(),]))"
)

_LEAF_BUILDERS = {
    "rbf": (RBF, 1),
    "matern32": (Matern32, 1),
    "matern52": (Matern52, 1),
    "periodic": (Periodic, 2),
    "const": (Constant, 1),
    "constant": (Constant, 1),
    "noise": (Noise, 1),
}


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                rest = text[pos:]
                if rest.strip() == "":
                    break
                bad = pos + len(rest) - len(rest.lstrip())
                raise KernelParseError(
                    f"unexpected character {text[bad]!r}", bad
                )
            if m.lastgroup == "num":
                self.tokens.append(("num", float(m.group("num")), m.start("num")))
            elif m.lastgroup == "name":
                self.tokens.append(("name", m.group("name"), m.start("name")))
            else:
                self.tokens.append(("op", m.group("op"), m.start("op")))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.next()
        if kind != "op" or val != value:
            raise KernelParseError(f"expected {value!r}, got {val!r}", pos)

    def parse(self):
        k = self.expr()
        kind, val, pos = self.peek()
        if kind is not None:
            raise KernelParseError(f"trailing input {val!r}", pos)
        return k

    def expr(self):
        terms = [self.term()]
        while self.peek()[:2] == ("op", "+"):
            self.next()
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self):
        factors = [self.factor()]
        while self.peek()[:2] == ("op", "*"):
            self.next()
            factors.append(self.factor())
        if len(factors) == 1:
            return factors[0]
        # scalar factors become Scale wrappers around the rest
        consts = [f for f in factors if isinstance(f, Constant)]
        others = [f for f in factors if not isinstance(f, Constant)]
        if not others:
            return Product(tuple(factors))
        inner = others[0] if len(others) == 1 else Product(tuple(others))
        for s in reversed(consts):
            inner = Scale(s.c, inner, labels=s.labels)
        return inner

    def factor(self):
        kind, val, pos = self.peek()
        if kind == "op" and val == "(":
            self.next()
            k = self.expr()
            self.expect(")")
            return k
        if kind == "num":
            self.next()
            return Constant(val, labels=("",))
        if kind == "name":
            self.next()
            if self.peek()[:2] == ("op", "("):
                return self.leaf(val, pos)
            # bare identifier: unit scalar named after it
            return Constant(1.0, labels=(val,))
        raise KernelParseError(f"expected a kernel term, got {val!r}", pos)

    def leaf(self, name, pos):
        key = name.lower()
        if key not in _LEAF_BUILDERS:
            raise KernelParseError(f"unknown kernel {name!r}", pos)
        cls, arity = _LEAF_BUILDERS[key]
        self.expect("(")
        args = []
        labels = []
        if self.peek()[:2] != ("op", ")"):
            while True:
                kind, val, apos = self.next()
                if kind == "num":
                    args.append(val)
                    labels.append("")
                elif kind == "name":
                    args.append(1.0)
                    labels.append(val)
                else:
                    raise KernelParseError(
                        f"expected argument, got {val!r}", apos
                    )
                if self.peek()[:2] == ("op", ","):
                    self.next()
                    continue
                break
        self.expect(")")
        while len(args) < arity:
            args.append(1.0)
            labels.append("")
        if len(args) != arity:
            raise KernelParseError(
                f"{name} takes {arity} argument(s), got {len(args)}", pos
            )
        channel = WARPED
        if self.peek()[:2] == ("op", "@"):
            self.next()
            kind, val, cpos = self.next()
            if kind != "name" or val not in ("orig", "original", "warped"):
                raise KernelParseError(
                    "expected 'orig' or 'warped' after '@'", cpos
                )
            channel = ORIGINAL if val.startswith("orig") else WARPED
        params = _LEAF_PARAMS[cls]
        kw = dict(zip(params, args))
        if cls in (RBF, Matern32, Matern52, Periodic):
            kw["channel"] = channel
        elif channel != WARPED:
            raise KernelParseError(f"{name} has no channel selector", pos)
        return cls(labels=tuple(labels), **kw)


def parse_kernel(text):
    """Parse the kernel expression grammar into a Kernel tree."""
    if not text or not text.strip():
        raise KernelParseError("empty kernel expression", 0)
    return _Parser(text).parse()


def kernel_to_string(k, theta=None):
    """Render a kernel back to grammar text, optionally at given theta."""
    if theta is not None:
        k = apply_hyper(k, theta)

    def chan(node):
        return "@orig" if getattr(node, "channel", WARPED) == ORIGINAL else ""

    def render(node, parent=None):
        t = type(node)
        if t is Sum:
            body = " + ".join(render(c, Sum) for c in node.children)
            return f"({body})" if parent in (Product, Scale) else body
        if t is Product:
            return " * ".join(render(c, Product) for c in node.children)
        if t is Scale:
            return f"{node.c:.17g} * {render(node.child, Scale)}"
        if t is Constant:
            return f"const({node.c:.17g})"
        if t is Noise:
            return f"noise({node.s2:.17g})"
        if t is Periodic:
            return f"periodic({node.p:.17g}, {node.l:.17g}){chan(node)}"
        return f"{_LEAF_NAMES[t]}({node.l:.17g}){chan(node)}"

    return render(k)
