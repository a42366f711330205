"""Triangulation files, gluing equations, volumes, and holonomy.

A manifold is described by a line-oriented text file carrying equation
rows directly: each row states

    sum_i a_i Log z_i + sum_i b_i Log(1 - z_i) + m.pi.i = target

with target 2.pi.i for edge and filling rows and 0 for completeness rows,
using principal logarithm branches; the integer m absorbs the branch
corrections.  Optional `tet` lines carry face gluings so that the solved
structure can be developed into a holonomy representation; optional
`peripheral` lines carry peripheral curve words over the development's
generators.
"""

import cmath
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from cuspkit.hmodel import DEFAULT_TOL, INFINITY, MoebiusMap, Tolerance, apply_boundary

TWO_PI_I = 2j * math.pi
RELATOR_TOL = 1e-9
MAX_NEWTON_ITERATIONS = 80
MAX_RESTARTS = 20


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


class SolveError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DevelopmentError(RuntimeError):
    pass


@dataclass(frozen=True)
class EquationRow:
    """One gluing equation: coefficients (a_i, b_i), branch integer m, row kind."""

    a: tuple
    b: tuple
    m: int
    kind: str  # "edge" | "completeness" | "filling"

    def target(self):
        return 0j if self.kind == "completeness" else TWO_PI_I

    def combine(self, other, p, q, kind):
        a = tuple(p * x + q * y for x, y in zip(self.a, other.a))
        b = tuple(p * x + q * y for x, y in zip(self.b, other.b))
        return EquationRow(a, b, p * self.m + q * other.m, kind)


@dataclass(frozen=True)
class IdealTriangulation:
    name: str
    n: int
    edge_rows: tuple
    cusp_rows: dict  # cusp index -> {"meridian": row, "longitude": row}
    framing_shift: dict = field(default_factory=dict)
    fillings: dict = field(default_factory=dict)  # cusp index -> (p, q)
    gluings: dict = field(default_factory=dict)  # (tet, face) -> (tet, perm)
    peripheral_words: dict = field(default_factory=dict)  # cusp -> {"meridian": w, ...}

    @property
    def cusp_count(self):
        return len(self.cusp_rows)

    def cusp_indices(self):
        return sorted(self.cusp_rows)

    def is_filled(self, cusp):
        return cusp in self.fillings

    def active_rows(self):
        """Edge rows plus, per cusp, either completeness rows or the filling row."""
        rows = list(self.edge_rows)
        for k in self.cusp_indices():
            mer = self.cusp_rows[k]["meridian"]
            lon = self.cusp_rows[k]["longitude"]
            if k in self.fillings:
                p, q = self.fillings[k]
                rows.append(mer.combine(lon, p, q, "filling"))
            else:
                rows.append(mer)
                rows.append(lon)
        return rows

    def with_filling(self, cusp, p, q):
        if cusp not in self.cusp_rows:
            raise ValueError("no cusp %d" % cusp)
        if (p, q) == (0, 0):
            raise ValueError("filling coefficients (0, 0)")
        fillings = dict(self.fillings)
        fillings[cusp] = (int(p), int(q))
        return IdealTriangulation(
            self.name, self.n, self.edge_rows, self.cusp_rows, self.framing_shift,
            fillings, self.gluings, self.peripheral_words,
        )

    def without_fillings(self):
        return IdealTriangulation(
            self.name, self.n, self.edge_rows, self.cusp_rows, self.framing_shift,
            {}, self.gluings, self.peripheral_words,
        )


def _parse_int(token, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise ParseError("bad integer %r in %s" % (token, what), lineno)


def _parse_row(tokens, n, lineno, kind):
    if len(tokens) != 2 * n + 1:
        raise ParseError(
            "expected %d coefficients plus m, got %d tokens" % (2 * n, len(tokens)), lineno
        )
    vals = [_parse_int(t, lineno, kind + " row") for t in tokens]
    a = tuple(vals[0:2 * n:2])
    b = tuple(vals[1:2 * n:2])
    return EquationRow(a, b, vals[2 * n], kind)


def parse_triangulation(text):
    """Parse a triangulation file into an IdealTriangulation."""
    name = None
    n = None
    edge_rows = []
    cusp_rows = {}
    framing = {}
    fillings = {}
    gluings = {}
    words = {}
    saw_content = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        saw_content = True
        tokens = line.split()
        head = tokens[0]
        if head == "manifold":
            if len(tokens) < 2:
                raise ParseError("manifold line needs a name", lineno)
            name = " ".join(tokens[1:])
        elif head == "tetrahedra":
            if len(tokens) != 2:
                raise ParseError("tetrahedra line needs a count", lineno)
            n = _parse_int(tokens[1], lineno, "tetrahedra")
            if n <= 0:
                raise ParseError("tetrahedron count must be positive", lineno)
        elif head == "edge":
            if n is None:
                raise ParseError("edge row before tetrahedra line", lineno)
            edge_rows.append(_parse_row(tokens[1:], n, lineno, "edge"))
        elif head == "cusp":
            if n is None:
                raise ParseError("cusp row before tetrahedra line", lineno)
            if len(tokens) < 3 or tokens[2] not in ("meridian", "longitude"):
                raise ParseError("cusp line needs index and meridian|longitude", lineno)
            k = _parse_int(tokens[1], lineno, "cusp index")
            row = _parse_row(tokens[3:], n, lineno, "completeness")
            slot = cusp_rows.setdefault(k, {})
            if tokens[2] in slot:
                raise ParseError("duplicate %s row for cusp %d" % (tokens[2], k), lineno)
            slot[tokens[2]] = row
        elif head == "framing_shift":
            if len(tokens) != 3:
                raise ParseError("framing_shift needs cusp and shift", lineno)
            framing[_parse_int(tokens[1], lineno, "cusp")] = _parse_int(
                tokens[2], lineno, "shift"
            )
        elif head == "filling":
            if len(tokens) != 4:
                raise ParseError("filling needs cusp, p, q", lineno)
            k = _parse_int(tokens[1], lineno, "cusp")
            p = _parse_int(tokens[2], lineno, "p")
            q = _parse_int(tokens[3], lineno, "q")
            if (p, q) == (0, 0):
                raise ParseError("filling coefficients (0, 0)", lineno)
            fillings[k] = (p, q)
        elif head == "tet":
            if len(tokens) != 5:
                raise ParseError("tet line needs: tet face tet' permutation", lineno)
            i = _parse_int(tokens[1], lineno, "tet")
            f = _parse_int(tokens[2], lineno, "face")
            j = _parse_int(tokens[3], lineno, "tet")
            perm_text = tokens[4]
            if not re.fullmatch(r"[0-3]{4}", perm_text) or len(set(perm_text)) != 4:
                raise ParseError("permutation must be 4 distinct digits 0-3", lineno)
            perm = tuple(int(ch) for ch in perm_text)
            if f not in (0, 1, 2, 3):
                raise ParseError("face index must be 0-3", lineno)
            gluings[(i, f)] = (j, perm)
        elif head == "peripheral":
            if len(tokens) < 4 or tokens[2] not in ("meridian", "longitude"):
                raise ParseError("peripheral line needs cusp, curve, word", lineno)
            k = _parse_int(tokens[1], lineno, "cusp")
            words.setdefault(k, {})[tokens[2]] = " ".join(tokens[3:])
        else:
            raise ParseError("unknown directive %r" % head, lineno)
    if not saw_content:
        raise ParseError("empty input")
    if n is None:
        raise ParseError("missing tetrahedra line")
    if len(edge_rows) != n:
        raise ParseError(
            "edge equation count %d does not match tetrahedron count %d"
            % (len(edge_rows), n)
        )
    if not cusp_rows:
        raise ParseError("no cusp rows")
    for k, slot in sorted(cusp_rows.items()):
        if "meridian" not in slot or "longitude" not in slot:
            raise ParseError("cusp %d needs both meridian and longitude rows" % k)
    for (i, f), (j, perm) in gluings.items():
        back = gluings.get((j, perm[f]))
        if back is None or back[0] != i or tuple(back[1][p] for p in perm) != (0, 1, 2, 3):
            raise ParseError("gluing (%d, %d) has no consistent inverse" % (i, f))
    return IdealTriangulation(
        name or "unnamed", n, tuple(edge_rows), cusp_rows, framing, fillings, gluings, words
    )


def read_triangulation(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_triangulation(fh.read())


# ------------------------------------------------------------------ solver


@dataclass(frozen=True)
class ShapeVector:
    z: tuple
    residual: float
    geometric: bool
    iterations: int
    flat: bool = False  # any shape on the real axis within tolerance

    def __iter__(self):
        return iter(self.z)


def _row_values(rows, z):
    logs = [cmath.log(w) for w in z]
    logs1 = [cmath.log(1 - w) for w in z]
    out = []
    for row in rows:
        s = complex(sum(a * l for a, l in zip(row.a, logs)))
        s += sum(b * l for b, l in zip(row.b, logs1))
        out.append(s + row.m * 1j * math.pi - row.target())
    return np.array(out, dtype=complex)


def _jacobian(rows, z):
    jac = np.zeros((len(rows), len(z)), dtype=complex)
    for r, row in enumerate(rows):
        for i, w in enumerate(z):
            jac[r, i] = row.a[i] - row.b[i] * (w / (1 - w))
    return jac


def _resolve_m(rows, z):
    """Re-choose each row's branch integer to best match the current shapes."""
    logs = [cmath.log(w) for w in z]
    logs1 = [cmath.log(1 - w) for w in z]
    new_rows = []
    changed = False
    for row in rows:
        s = complex(sum(a * l for a, l in zip(row.a, logs)))
        s += sum(b * l for b, l in zip(row.b, logs1))
        # the pi*i parity of a row is combinatorial; only 2*pi*i jumps occur
        m = row.m + 2 * round((row.target() - s).imag / (2.0 * math.pi) - row.m / 2.0)
        if m != row.m:
            changed = True
            row = EquationRow(row.a, row.b, m, row.kind)
        new_rows.append(row)
    return new_rows, changed


def _newton(rows, z0, tol):
    u = np.array([cmath.log(w) for w in z0], dtype=complex)
    z = np.exp(u)
    resid = math.inf
    for iteration in range(1, MAX_NEWTON_ITERATIONS + 1):
        fvec = _row_values(rows, z)
        resid = float(np.max(np.abs(fvec))) if len(fvec) else 0.0
        if resid < tol:
            return tuple(z), resid, iteration, True
        jac = _jacobian(rows, z)
        try:
            step, *_ = np.linalg.lstsq(jac, -fvec, rcond=None)
        except np.linalg.LinAlgError:
            break
        alpha = 1.0
        improved = False
        while alpha > 1e-4:
            u_new = u + alpha * step
            z_new = np.exp(u_new)
            if np.any(np.abs(z_new) > 1e9) or np.any(np.abs(z_new - 1) < 1e-12) or np.any(
                np.abs(z_new) < 1e-12
            ):
                alpha *= 0.5
                continue
            r_new = float(np.max(np.abs(_row_values(rows, z_new))))
            if r_new < resid * (1 - 1e-4 * alpha) or r_new < tol:
                u, z = u_new, z_new
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return tuple(z), resid, MAX_NEWTON_ITERATIONS, False


def solve_shapes(tri, tol=DEFAULT_TOL, initial=None, rng_seed=0):
    """Solve the active gluing equations by damped Newton iteration.

    Branch integers from the file are used as-is first; if a Newton run
    converges geometrically up to pi.i multiples, the corrections are
    re-resolved and the run repeated (needed when fillings move shapes
    across log branches).
    """
    rows = tri.active_rows()
    guesses = []
    if initial is not None:
        guesses.append(tuple(initial))
    guesses.append(tuple(cmath.exp(1j * math.pi / 3) for _ in range(tri.n)))
    rng = np.random.default_rng(rng_seed)
    for _ in range(MAX_RESTARTS):
        r = 3.0 * np.sqrt(rng.uniform(0.01, 1.0, size=tri.n))
        th = rng.uniform(0.05, math.pi - 0.05, size=tri.n)
        guesses.append(tuple(r * np.exp(1j * th)))

    best_resid = math.inf
    for guess in guesses:
        current = list(rows)
        start = guess
        for _attempt in range(5):
            z, resid, iters, converged = _newton(current, start, tol.solver)
            best_resid = min(best_resid, resid)
            if converged:
                return _finish(z, resid, iters, tol)
            # retry with branch integers re-resolved at the Newton endpoint
            current, changed = _resolve_m(current, z)
            start = z
            if not changed:
                break
    raise SolveError("no convergence after restarts", residual=best_resid)


def _finish(z, resid, iters, tol):
    imags = [w.imag for w in z]
    flat = any(abs(v) < 1e-9 for v in imags)
    geometric = all(v > 0 for v in imags) and not flat
    return ShapeVector(tuple(z), resid, geometric, iters, flat)


# ------------------------------------------------------------------ volume

_BERNOULLI_COUNT = 64


def _bernoulli_numbers(count):
    b = [Fraction(1)]
    for m in range(1, count):
        acc = Fraction(0)
        comb = 1
        for j in range(m):
            acc += comb * b[j]
            comb = comb * (m + 1 - j) // (j + 1)
        b.append(-acc / (m + 1))
    return [float(x) for x in b]


_BERNOULLI = _bernoulli_numbers(_BERNOULLI_COUNT)
_PI2_6 = math.pi * math.pi / 6.0


def _dilog_series(z):
    term = z
    total = z
    for k in range(2, 400):
        term *= z
        total += term / (k * k)
        if abs(term) < 1e-18 * k * k:
            break
    return total


def _dilog_u_series(z):
    u = -cmath.log(1 - z)
    total = 0j
    power = u
    factorial = 1.0
    for k in range(_BERNOULLI_COUNT):
        factorial *= k + 1
        total += _BERNOULLI[k] * power / factorial
        power *= u
        if abs(power) / factorial < 1e-19:
            break
    return total


def dilog(z):
    """Complex dilogarithm, double precision, principal branch."""
    z = complex(z)
    if abs(z) <= 0.72:
        return _dilog_series(z)
    if abs(z) >= 1.4:
        w = 1.0 / z
        return -_dilog_series(w) - _PI2_6 - 0.5 * cmath.log(-z) ** 2
    if abs(1 - z) <= 0.72:
        return _PI2_6 - cmath.log(z) * cmath.log(1 - z) - _dilog_series(1 - z)
    return _dilog_u_series(z)


def tetrahedron_volume(z):
    """Volume of the ideal tetrahedron with shape z (Bloch-Wigner dilogarithm)."""
    z = complex(z)
    if abs(z.imag) < 1e-14:
        return 0.0
    return dilog(z).imag + cmath.phase(1 - z) * math.log(abs(z))


def volume(shapes):
    """Total volume; negatively oriented shapes contribute negatively."""
    return float(sum(tetrahedron_volume(z) for z in shapes))


# ------------------------------------------------------------------ words


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def word_to_letters(word):
    """Parse a word into signed 1-based generator indices.

    Two formats: compact letters ("aBc": lowercase = generator, uppercase =
    inverse) and bracketed integers ("[1 -2 3]") for presentations with
    more than 26 generators.
    """
    word = word.strip()
    if word.startswith("["):
        if not word.endswith("]"):
            raise ParseError("unterminated bracket word %r" % word)
        inner = word[1:-1].replace(",", " ").split()
        out = []
        for tok in inner:
            try:
                v = int(tok)
            except ValueError:
                raise ParseError("bad word token %r" % tok)
            if v == 0:
                raise ParseError("word letters are nonzero signed indices")
            out.append(v)
        return out
    out = []
    for ch in word:
        if ch in _LETTERS:
            out.append(_LETTERS.index(ch) + 1)
        elif ch.lower() in _LETTERS:
            out.append(-(_LETTERS.index(ch.lower()) + 1))
        else:
            raise ParseError("bad word character %r" % ch)
    return out


def letters_to_word(letters, generator_count):
    if generator_count <= 26:
        return "".join(
            _LETTERS[abs(v) - 1].upper() if v < 0 else _LETTERS[v - 1] for v in letters
        ) or "[]"
    return "[" + " ".join(str(v) for v in letters) + "]"


def evaluate_word(generators, word):
    """Product of generator matrices, leftmost letter applied last."""
    letters = word if isinstance(word, list) else word_to_letters(word)
    result = MoebiusMap.identity()
    for v in letters:
        if abs(v) > len(generators):
            raise ValueError("word letter %d out of range" % v)
        g = generators[abs(v) - 1]
        if v < 0:
            g = g.inverse()
        result = result * g
    return result


# ------------------------------------------------------------------ holonomy


@dataclass(frozen=True)
class HolonomyRep:
    """Holonomy representation: generators, relators, peripheral words."""

    generators: tuple
    relators: tuple
    peripheral: dict  # cusp index -> {"meridian": word, "longitude": word}
    name: str = "unnamed"

    def word_map(self, word):
        return evaluate_word(self.generators, word)

    def cusp_indices(self):
        return sorted(self.peripheral)

    def relator_residual(self):
        worst = 0.0
        for rel in self.relators:
            m = self.word_map(rel)
            worst = max(worst, _identity_defect(m))
        return worst


def _identity_defect(m):
    return min(
        max(abs(m.a - s), abs(m.b), abs(m.c), abs(m.d - s)) for s in (1.0, -1.0)
    )


def parabolic_fixed_point(m, tol=DEFAULT_TOL):
    """Fixed point of a parabolic map (INFINITY when c is numerically zero)."""
    tr = m.trace()
    if abs(tr * tr - 4) > 1e-6:
        raise ValueError("map is not parabolic, tr^2 = %r" % (tr * tr))
    if abs(m.c) < tol.geometric * max(1.0, abs(m.a), abs(m.d)):
        return INFINITY
    return (m.a - m.d) / (2 * m.c)


def _three_point_map(z1, z2, z3):
    """MoebiusMap sending (z1, z2, z3) to (0, 1, INFINITY)."""
    if z1 is INFINITY:
        return MoebiusMap(0, z2 - z3, 1, -z3)
    if z2 is INFINITY:
        return MoebiusMap(1, -z1, 1, -z3)
    if z3 is INFINITY:
        return MoebiusMap(1, -z1, 0, z2 - z1)
    return MoebiusMap(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))


def map_three_to_three(sources, targets):
    ms = _three_point_map(*sources)
    mt = _three_point_map(*targets)
    return mt.inverse() * ms


def _canonical_vertices(z):
    # shape parameter of edge (0,1) is z when vertices sit at (0, inf, 1, z)
    return (0j, INFINITY, 1 + 0j, z)


def _boundary_close(x, y, tol=1e-6):
    # Compare as points of the Riemann sphere: a finite value of modulus
    # beyond 1/tol is within chordal tolerance of infinity, which matters
    # when a Moebius image lands at infinity up to rounding in the
    # denominator.
    if x is INFINITY and y is INFINITY:
        return True
    if x is INFINITY:
        return abs(y) > 1.0 / tol
    if y is INFINITY:
        return abs(x) > 1.0 / tol
    return abs(x - y) <= tol * max(1.0, abs(x), abs(y))


def develop(tri, shapes):
    """Develop the triangulation in the upper half-space.

    Returns (positions, generator_matrices, letter_of_gluing) where
    positions[i] is the 4-tuple of ideal vertex positions of tetrahedron i
    in the spanning-tree placement, and letter_of_gluing maps each directed
    non-tree gluing (i, f) to a signed generator index.
    """
    if not tri.gluings:
        raise DevelopmentError("triangulation carries no gluing data")
    z = list(shapes.z if isinstance(shapes, ShapeVector) else shapes)
    positions = {0: _canonical_vertices(z[0])}
    tree = set()
    queue = [0]
    while queue:
        i = queue.pop(0)
        for f in range(4):
            entry = tri.gluings.get((i, f))
            if entry is None:
                raise DevelopmentError("tetrahedron %d face %d is unglued" % (i, f))
            j, perm = entry
            if j in positions:
                continue
            pos_j = [None] * 4
            for v in range(4):
                if v == f:
                    continue
                pos_j[perm[v]] = positions[i][v]
            pos_j[perm[f]] = _fourth_vertex(pos_j, perm[f], z[j])
            positions[j] = tuple(pos_j)
            tree.add((i, f))
            tree.add((j, perm[f]))
            queue.append(j)
    if len(positions) != tri.n:
        raise DevelopmentError("face-pairing graph is not connected")

    generators = []
    letter_of = {}
    seen = set()
    for i in range(tri.n):
        for f in range(4):
            if (i, f) in tree or (i, f) in seen:
                continue
            j, perm = tri.gluings[(i, f)]
            seen.add((i, f))
            seen.add((j, perm[f]))
            # candidate placement of j as seen across face f of i
            pos_cand = [None] * 4
            for v in range(4):
                if v == f:
                    continue
                pos_cand[perm[v]] = positions[i][v]
            pos_cand[perm[f]] = _fourth_vertex(list(pos_cand), perm[f], z[j])
            g = _match_placement(positions[j], tuple(pos_cand))
            generators.append(g)
            idx = len(generators)
            letter_of[(i, f)] = idx
            letter_of[(j, perm[f])] = -idx
    return positions, generators, letter_of


def _fourth_vertex(pos, missing, z):
    canon = _canonical_vertices(z)
    src = []
    dst = []
    for v in range(4):
        if v == missing:
            continue
        src.append(canon[v])
        dst.append(pos[v])
    m = map_three_to_three(tuple(src), tuple(dst))
    return apply_boundary(m, canon[missing])


def _match_placement(pos_old, pos_new):
    """Moebius map carrying the old placement to the new one (deck element)."""
    src = []
    dst = []
    for v in range(4):
        if len(src) < 3:
            src.append(pos_old[v])
            dst.append(pos_new[v])
    g = map_three_to_three(tuple(src), tuple(dst))
    check_src, check_dst = pos_old[3], pos_new[3]
    img = apply_boundary(g, check_src)
    if not _boundary_close(img, check_dst, 1e-6):
        raise DevelopmentError("deck transformation mismatch on fourth vertex")
    return g


def _edge_classes(tri):
    """Orbits of (tet, vertex pair) under the face gluings."""
    pairs = [
        (i, u, v) for i in range(tri.n) for u in range(4) for v in range(4) if u < v
    ]
    parent = {p: p for p in pairs}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    for (i, f), (j, perm) in tri.gluings.items():
        for u in range(4):
            for v in range(4):
                if u < v and u != f and v != f:
                    pu, pv = perm[u], perm[v]
                    union((i, u, v), (j, min(pu, pv), max(pu, pv)))
    classes = {}
    for p in pairs:
        classes.setdefault(find(p), []).append(p)
    return sorted(classes.values())


def _edge_relator(tri, letter_of, start):
    """Word read off by walking once around an edge."""
    i, u, v = start
    exits = [w for w in range(4) if w not in (u, v)]
    w = exits[0]
    word = []
    state = (i, u, v, w)
    while True:
        i, u, v, w = state
        j, perm = tri.gluings[(i, w)]
        letter = letter_of.get((i, w))
        if letter is not None:
            word.append(letter)
        nu, nv, nw = perm[u], perm[v], perm[w]
        w_next = 6 - nu - nv - nw
        state = (j, nu, nv, w_next)
        if (state[0], state[1], state[2], state[3]) == (
            start[0], start[1], start[2], exits[0],
        ):
            break
        if len(word) > 200:
            raise DevelopmentError("edge walk did not close")
    return word


def _cyclic_reduce(word):
    out = []
    for v in word:
        if out and out[-1] == -v:
            out.pop()
        else:
            out.append(v)
    while len(out) >= 2 and out[0] == -out[-1]:
        out = out[1:-1]
    return out


def _substitute(word, g, replacement):
    out = []
    inverse = [-x for x in reversed(replacement)]
    for v in word:
        if v == g:
            out.extend(replacement)
        elif v == -g:
            out.extend(inverse)
        else:
            out.append(v)
    return out


def _free_reduce(word):
    out = []
    for v in word:
        if out and out[-1] == -v:
            out.pop()
        else:
            out.append(v)
    return out


def simplify_presentation(generators, relators, max_sub_length=16):
    """Deterministic Tietze simplification.

    Eliminates any generator occurring exactly once in some relator by
    substitution, while substituted words stay short; removes trivial and
    duplicate relators.  Generator matrices are preserved for the survivors.
    Returns (gens, relators, rewrites) where rewrites[k] expresses original
    generator k+1 as a word over the surviving generators.
    """
    gens = list(generators)
    rels = [_cyclic_reduce(list(r)) for r in relators]
    rels = [r for r in rels if r]
    rewrites = {k + 1: [k + 1] for k in range(len(gens))}
    changed = True
    while changed:
        changed = False
        rels.sort(key=lambda r: (len(r), r))
        for ridx, rel in enumerate(rels):
            counts = {}
            for v in rel:
                counts[abs(v)] = counts.get(abs(v), 0) + 1
            candidates = sorted(g for g, c in counts.items() if c == 1)
            for g in candidates:
                pos = next(k for k, v in enumerate(rel) if abs(v) == g)
                rest = rel[pos + 1:] + rel[:pos]
                # rel = prefix g^s suffix (cyclically): g^s = inverse(rest)
                replacement = [-v for v in reversed(rest)]
                if rel[pos] < 0:
                    replacement = [-v for v in reversed(replacement)]
                if len(replacement) > max_sub_length:
                    continue
                new_rels = []
                ok = True
                for k, other in enumerate(rels):
                    if k == ridx:
                        continue
                    rewritten = _cyclic_reduce(_substitute(other, g, replacement))
                    if len(rewritten) > 120:
                        ok = False
                        break
                    if rewritten:
                        new_rels.append(rewritten)
                if not ok:
                    continue
                # relabel: drop generator g
                mapping = {}
                new_gens = []
                for old in range(1, len(gens) + 1):
                    if old == g:
                        continue
                    new_gens.append(gens[old - 1])
                    mapping[old] = len(new_gens)

                def relabel(word):
                    return [int(math.copysign(mapping[abs(v)], v)) for v in word]

                rels = [relabel(r) for r in new_rels]
                gens = new_gens
                rewrites = {
                    orig: relabel(_free_reduce(_substitute(w, g, replacement)))
                    for orig, w in rewrites.items()
                }
                changed = True
                break
            if changed:
                break
    unique = []
    seen = set()
    for r in rels:
        key = tuple(r)
        if key not in seen:
            seen.add(key)
            unique.append(r)
    return gens, unique, rewrites


def build_holonomy(tri, shapes, tol=DEFAULT_TOL):
    """Develop the solved triangulation into a holonomy representation.

    Raw face-pairing generators are extracted from the developed tiling,
    edge relators validated against the identity, and the presentation
    simplified deterministically so file peripheral words stay meaningful.
    """
    _, raw_gens, letter_of = develop(tri, shapes)
    relator_words = []
    for cls in _edge_classes(tri):
        word = _cyclic_reduce(_edge_relator(tri, letter_of, cls[0]))
        if word:
            relator_words.append(word)
    for word in relator_words:
        defect = _identity_defect(evaluate_word(raw_gens, word))
        if defect > RELATOR_TOL:
            raise DevelopmentError(
                "development inconsistent: relator residual %.3g" % defect
            )
    gens, rels, _ = simplify_presentation(raw_gens, relator_words)
    count = len(gens)
    rel_strings = tuple(letters_to_word(r, count) for r in rels)
    peripheral = {}
    for k in tri.cusp_indices():
        slot = tri.peripheral_words.get(k)
        if not slot:
            continue
        peripheral[k] = dict(slot)
    rep = HolonomyRep(tuple(gens), rel_strings, peripheral, tri.name)
    _validate_peripheral(rep, tri, tol)
    return rep


def _validate_peripheral(rep, tri, tol):
    for k, slot in rep.peripheral.items():
        if "meridian" not in slot or "longitude" not in slot:
            raise DevelopmentError("cusp %d peripheral words incomplete" % k)
        mu = rep.word_map(slot["meridian"])
        lam = rep.word_map(slot["longitude"])
        comm = mu * lam * mu.inverse() * lam.inverse()
        if _identity_defect(comm) > 1e-6:
            raise DevelopmentError("peripheral words of cusp %d do not commute" % k)
        if tri.is_filled(k):
            p, q = tri.fillings[k]
            filled = _power(mu, p) * _power(lam, q)
            if _identity_defect(filled) > 1e-5:
                raise DevelopmentError(
                    "filled curve of cusp %d is not trivial in the holonomy" % k
                )
        else:
            for m in (mu, lam):
                tr = m.trace()
                if abs(tr * tr - 4) > 1e-6:
                    raise DevelopmentError("peripheral word of cusp %d not parabolic" % k)


def _power(m, e):
    result = MoebiusMap.identity()
    base = m if e >= 0 else m.inverse()
    for _ in range(abs(e)):
        result = result * base
    return result


# ------------------------------------------------------------------ cusp translations


def cusp_frame(rep, cusp, tol=DEFAULT_TOL):
    """Conjugator moving the cusp's fixed point to INFINITY, meridian along R+.

    Returns (frame, t_mu, t_lambda) where frame is the MoebiusMap and the
    translations are those of the conjugated peripheral maps at height 1.
    """
    slot = rep.peripheral.get(cusp)
    if slot is None:
        raise ValueError("no peripheral words for cusp %d" % cusp)
    mu = rep.word_map(slot["meridian"])
    lam = rep.word_map(slot["longitude"])
    fix = parabolic_fixed_point(mu, tol)
    if fix is INFINITY:
        base = MoebiusMap.identity()
    else:
        base = MoebiusMap(0, -1, 1, -fix)
    t_mu = _translation_part(base * mu * base.inverse())
    t_lam = _translation_part(base * lam * base.inverse())
    if abs(t_mu) == 0:
        raise ValueError("meridian word acts trivially at the cusp")
    # rotate/scale so the meridian translation is real and positive
    s2 = abs(t_mu) / t_mu
    s = cmath.sqrt(s2)
    rot = MoebiusMap(s, 0, 0, 1 / s)
    frame = rot * base
    t_mu2 = _translation_part(frame * mu * frame.inverse())
    t_lam2 = _translation_part(frame * lam * frame.inverse())
    if abs((t_lam2 / t_mu2).imag) < 1e-12:
        raise ValueError("degenerate cusp lattice")
    return frame, t_mu2, t_lam2


def _translation_part(m):
    if abs(m.c) > 1e-6:
        raise ValueError("conjugated peripheral map is not upper triangular")
    return m.b / m.d


def cusp_translations(tri, shapes, cusp, rep=None, tol=DEFAULT_TOL):
    """Euclidean translations (t_mu, t_lambda) at reference height 1."""
    if tri.is_filled(cusp):
        raise ValueError("no cusp cross-section: cusp %d is filled" % cusp)
    if rep is None:
        rep = build_holonomy(tri, shapes, tol)
    _, t_mu, t_lam = cusp_frame(rep, cusp, tol)
    return t_mu, t_lam


# ------------------------------------------------------------------ holonomy files


def parse_complex(token):
    """Complex literal in x+yi form (also bare reals and bare yi)."""
    text = token.strip()
    if not text:
        raise ParseError("empty complex literal")
    jtext = text.replace("i", "j")
    try:
        return complex(jtext)
    except ValueError:
        raise ParseError("bad complex literal %r" % token)


def format_complex(value):
    re_part = repr(float(value.real))
    im_part = repr(float(value.imag))
    sign = "+" if value.imag >= 0 else "-"
    return "%s%s%si" % (re_part, sign, im_part.lstrip("-"))


def parse_holonomy(text):
    """Parse a holonomy representation file."""
    gens = []
    relators = []
    peripheral = {}
    name = "unnamed"
    saw = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        saw = True
        tokens = line.split()
        head = tokens[0]
        if head == "manifold":
            name = " ".join(tokens[1:]) or name
        elif head == "gen":
            if len(tokens) != 5:
                raise ParseError("gen line needs 4 entries", lineno)
            try:
                a, b, c, d = (parse_complex(t) for t in tokens[1:])
            except ParseError as exc:
                raise ParseError(str(exc), lineno)
            try:
                gens.append(MoebiusMap(a, b, c, d))
            except ValueError as exc:
                raise ParseError(str(exc), lineno)
        elif head == "relator":
            if len(tokens) < 2:
                raise ParseError("relator line needs a word", lineno)
            relators.append(" ".join(tokens[1:]))
        elif head == "cusp":
            if len(tokens) < 4 or tokens[2] not in ("meridian", "longitude"):
                raise ParseError("cusp line needs index, curve, word", lineno)
            k = _parse_int(tokens[1], lineno, "cusp index")
            peripheral.setdefault(k, {})[tokens[2]] = " ".join(tokens[3:])
        else:
            raise ParseError("unknown directive %r" % head, lineno)
    if not saw:
        raise ParseError("empty input")
    if not gens:
        raise ParseError("no generators")
    rep = HolonomyRep(tuple(gens), tuple(relators), peripheral, name)
    for word in relators:
        word_to_letters(word)  # syntax check
    return rep


def read_holonomy(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_holonomy(fh.read())


def format_holonomy(rep):
    lines = ["manifold %s" % rep.name]
    for g in rep.generators:
        lines.append(
            "gen %s %s %s %s"
            % tuple(format_complex(v) for v in (g.a, g.b, g.c, g.d))
        )
    for rel in rep.relators:
        lines.append("relator %s" % rel)
    for k in sorted(rep.peripheral):
        for curve in ("meridian", "longitude"):
            if curve in rep.peripheral[k]:
                lines.append("cusp %d %s %s" % (k, curve, rep.peripheral[k][curve]))
    return "\n".join(lines) + "\n"
