"""Metrics, connections and transport on a diagonal calculus.

Automorphisms extend to one-forms by an invertible scalar action on the
theta basis; an extension is differentiable when it commutes with d.  The
left tensor basis theta^s (x)_L theta^s' = theta^s (x)_A phi_s^-1 theta^s'
makes tensors left-linear in both slots, so a metric is a plain table of
element entries.  A connection is a family of transport operators V_s with
V_s(a w) = phi_s^-1(a) V_s(w); its covariant derivative is
nabla(w) = vtheta (x)_A w - sum_s theta^s (x)_A V_s(w), metric compatibility
is V_s(g) = g for every s, and torsion is d minus wedge-after-nabla.
"""

from __future__ import annotations

from .algebra import AlgebraError, Element
from .calculus import Calculus, CalculusError, Form
from .coeff import RationalFunction, solve_linear
from .morphism import Endomorphism


class GeometryError(AlgebraError):
    pass


class FormExtension:
    """An endomorphism extended to forms by a scalar action on the basis."""

    __slots__ = ("calculus", "base", "matrix")

    def __init__(self, calculus: Calculus, base: Endomorphism, theta_action: dict):
        """theta_action maps each label to a list of (coefficient, label)."""
        self.calculus = calculus
        self.base = base
        n = len(calculus.labels)
        matrix = [[_rf_zero(calculus)] * n for _ in range(n)]
        for lab in calculus.labels:
            if lab not in theta_action:
                raise GeometryError("missing theta image for %r" % lab)
        for lab, entries in theta_action.items():
            k = calculus._pos[lab]
            for rf, lab2 in entries:
                matrix[k][calculus._pos[lab2]] = matrix[k][calculus._pos[lab2]] + rf
        self.matrix = matrix

    def theta_image(self, label: str) -> Form:
        k = self.calculus._pos[label]
        alg = self.calculus.algebra
        return self.calculus.form({
            (j,): alg.scalar(rf) for j, rf in enumerate(self.matrix[k])
            if not rf.is_zero()})

    def apply(self, form: Form) -> Form:
        if form.calculus is not self.calculus:
            raise GeometryError("form from a different calculus")
        out = self.calculus.zero_form()
        for index, coeff in form.terms.items():
            piece = self.calculus.embed(self.base.apply(coeff))
            for pos in index:
                piece = piece * self.theta_image(self.calculus.labels[pos])
            out = out + piece
        return out

    __call__ = apply

    def commutes_with_d(self):
        """None when the extension is differentiable, else a witness pair."""
        calc = self.calculus
        for name, g in calc.generator_elements():
            left = self.apply(calc.d_element(g))
            right = calc.d_element(self.base.apply(g))
            if left != right:
                return (name, left - right)
        return None

    def inverse(self) -> "FormExtension":
        inv_matrix = _invert_matrix(self.matrix, self.calculus)
        if inv_matrix is None:
            raise GeometryError("theta action is not invertible")
        action = {lab: [(rf, self.calculus.labels[j])
                        for j, rf in enumerate(inv_matrix[k]) if not rf.is_zero()]
                  for k, lab in enumerate(self.calculus.labels)}
        return FormExtension(self.calculus, self.base.inverse(), action)


def _rf_zero(calculus: Calculus) -> RationalFunction:
    return RationalFunction.from_value(calculus.algebra.params, 0)


def _invert_matrix(matrix, calculus: Calculus):
    n = len(matrix)
    params = calculus.algebra.params
    zero = RationalFunction.from_value(params, 0)
    one = RationalFunction.from_value(params, 1)
    columns = []
    for l in range(n):
        unit = [one if k == l else zero for k in range(n)]
        solved = solve_linear([list(row) for row in matrix], unit, params)
        if solved is None:
            return None
        solution, free = solved
        if free:
            return None
        columns.append(solution)
    return [[columns[l][k] for l in range(n)] for k in range(n)]


def derive_theta_action(calculus: Calculus, endo: Endomorphism) -> dict:
    """Solve phi(d g) = d(phi g) for the scalar action on the theta basis."""
    params = calculus.algebra.params
    zero = RationalFunction.from_value(params, 0)
    labels = calculus.labels
    probes = calculus.generator_elements()
    action = {}
    columns = []
    targets_by_label = {lab: [] for lab in labels}
    for _, g in probes:
        columns.append([endo.apply(calculus.derivations[lab_k].apply(g))
                        for lab_k in labels])
        for lab_j in labels:
            targets_by_label[lab_j].append(
                calculus.derivations[lab_j].apply(endo.apply(g)))
    for lab_j in labels:
        rows = []
        rhs = []
        for col_set, target in zip(columns, targets_by_label[lab_j]):
            words = set(target.terms)
            for elt in col_set:
                words.update(elt.terms)
            for word in sorted(words):
                rows.append([elt.terms.get(word, zero) for elt in col_set])
                rhs.append(target.terms.get(word, zero))
        solved = solve_linear(rows, rhs, params)
        if solved is None:
            raise GeometryError(
                "endomorphism does not extend to the basis form %s" % lab_j)
        solution, _ = solved
        action[lab_j] = [(rf, labels[k]) for k, rf in enumerate(solution)
                         if not rf.is_zero()]
    return _transpose_action(action, labels)


def _transpose_action(action: dict, labels) -> dict:
    """Reorganize per-target solutions into per-source image rows."""
    rows = {lab: [] for lab in labels}
    for lab_j, entries in action.items():
        for rf, lab_k in entries:
            rows[lab_k].append((rf, lab_j))
    return rows


class TensorForm:
    """A sum of element multiples of theta^s (x)_L theta^s'."""

    __slots__ = ("calculus", "terms")

    def __init__(self, calculus: Calculus, terms: dict):
        self.calculus = calculus
        self.terms = {k: v for k, v in terms.items() if not v.is_zero()}

    def is_zero(self) -> bool:
        return not self.terms

    def entry(self, lab1: str, lab2: str) -> Element:
        key = (self.calculus._pos[lab1], self.calculus._pos[lab2])
        return self.terms.get(key, self.calculus.algebra.zero())

    def __add__(self, other: "TensorForm") -> "TensorForm":
        if not isinstance(other, TensorForm) or other.calculus is not self.calculus:
            return NotImplemented
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            prev = out.get(key)
            s = coeff if prev is None else prev + coeff
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
        return TensorForm(self.calculus, out)

    def __neg__(self) -> "TensorForm":
        return TensorForm(self.calculus, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "TensorForm") -> "TensorForm":
        if not isinstance(other, TensorForm) or other.calculus is not self.calculus:
            return NotImplemented
        return self + (-other)

    def __rmul__(self, other) -> "TensorForm":
        """Left multiplication by an element (both slots are left-linear)."""
        if isinstance(other, Element):
            return TensorForm(self.calculus,
                              {k: other * v for k, v in self.terms.items()})
        return TensorForm(self.calculus,
                          {k: v.scale(other) for k, v in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, TensorForm) or other.calculus is not self.calculus:
            return NotImplemented
        return (self - other).is_zero()

    def __str__(self):
        if not self.terms:
            return "0"
        labels = self.calculus.labels
        parts = []
        for key in sorted(self.terms):
            coeff = self.terms[key]
            body = "%s (x) %s" % (labels[key[0]], labels[key[1]])
            parts.append("(%s) * %s" % (coeff, body))
        return " + ".join(parts)

    __repr__ = __str__


class Geometry:
    """A calculus with differentiable extensions of its twists."""

    def __init__(self, calculus: Calculus, extensions: dict):
        self.calculus = calculus
        self.extensions = dict(extensions)
        self._inverse_extensions = {}
        self._inverse_twists = {}

    def extension(self, label: str) -> FormExtension:
        ext = self.extensions.get(label)
        if ext is None:
            raise GeometryError("no extension for the twist of %r" % label)
        return ext

    def inverse_extension(self, label: str) -> FormExtension:
        ext = self._inverse_extensions.get(label)
        if ext is None:
            ext = self.extension(label).inverse()
            self._inverse_extensions[label] = ext
        return ext

    def inverse_twist(self, label: str) -> Endomorphism:
        endo = self._inverse_twists.get(label)
        if endo is None:
            endo = self.calculus.twists[label].inverse()
            self._inverse_twists[label] = endo
        return endo

    # -- tensors -----------------------------------------------------------

    def tensor_L(self, left: Form, right: Form) -> TensorForm:
        """The left tensor product of two one-forms."""
        _require_grade_one(left)
        _require_grade_one(right)
        out = {}
        for (s,), a in left.terms.items():
            for (k,), b in right.terms.items():
                prev = out.get((s, k))
                prod = a * b
                out[(s, k)] = prod if prev is None else prev + prod
        return TensorForm(self.calculus, out)

    def from_tensor_A(self, entries: dict) -> TensorForm:
        """Convert entries over theta^s (x)_A theta^k into the left basis."""
        calc = self.calculus
        out = TensorForm(calc, {})
        for (s, k), coeff in entries.items():
            row = self.extension(calc.labels[s]).matrix[k]
            piece = {}
            for j, rf in enumerate(row):
                if not rf.is_zero():
                    piece[(s, j)] = coeff.scale(rf)
            out = out + TensorForm(calc, piece)
        return out

    def to_tensor_A(self, tensor: TensorForm) -> dict:
        """Coordinates of a tensor over the theta^s (x)_A theta^k basis."""
        calc = self.calculus
        out = {}
        for (s, j), coeff in tensor.terms.items():
            row = self.inverse_extension(calc.labels[s]).matrix[j]
            for k, rf in enumerate(row):
                if rf.is_zero():
                    continue
                key = (s, k)
                add = coeff.scale(rf)
                prev = out.get(key)
                total = add if prev is None else prev + add
                if total.is_zero():
                    out.pop(key, None)
                else:
                    out[key] = total
        return out

    def tensor_A(self, left: Form, right: Form) -> TensorForm:
        """theta^s a (x)_A theta^k b, re-expressed in the left basis."""
        _require_grade_one(left)
        _require_grade_one(right)
        calc = self.calculus
        entries = {}
        for (s,), a in left.terms.items():
            for (k,), b in right.terms.items():
                moved = calc.twists[calc.labels[s]].apply(b)
                prev = entries.get((s, k))
                entries[(s, k)] = a * moved if prev is None else prev + a * moved
        return self.from_tensor_A(entries)

    def wedge_project(self, tensor: TensorForm) -> Form:
        calc = self.calculus
        out = calc.zero_form()
        for (s, j), coeff in tensor.terms.items():
            basis = calc.wedge(calc.theta(calc.labels[s]),
                               calc.theta(calc.labels[j]))
            out = out + coeff * basis
        return out


def _require_grade_one(form: Form) -> None:
    for key in form.terms:
        if len(key) != 1:
            raise GeometryError("expected a one-form")


class Connection:
    """Transport operators V_s on one-forms, twisted-linear over the algebra."""

    def __init__(self, geometry: Geometry, table: dict, name: str | None = None):
        """table maps (direction label, basis label) to the transported form."""
        self.geometry = geometry
        self.name = name
        calc = geometry.calculus
        self.table = {}
        for s in calc.labels:
            for k in calc.labels:
                if (s, k) not in table:
                    raise GeometryError("missing transport entry V_%s[%s]" % (s, k))
        for (s, k), form in table.items():
            if s not in calc._pos or k not in calc._pos:
                raise GeometryError("unknown label in transport entry")
            _require_grade_one(form)
            self.table[(s, k)] = form

    def transport(self, s: str, form: Form) -> Form:
        """V_s on a one-form: V_s(a theta^k) = phi_s^-1(a) V_s(theta^k)."""
        _require_grade_one(form)
        calc = self.geometry.calculus
        inv = self.geometry.inverse_twist(s)
        out = calc.zero_form()
        for (k,), coeff in form.terms.items():
            out = out + inv.apply(coeff) * self.table[(s, calc.labels[k])]
        return out

    def transport_tensor(self, s: str, tensor: TensorForm) -> TensorForm:
        """V_s on a tensor, twisting entries and transporting both slots."""
        geo = self.geometry
        calc = geo.calculus
        inv = geo.inverse_twist(s)
        out = TensorForm(calc, {})
        for (k, k2), coeff in tensor.terms.items():
            left = self.table[(s, calc.labels[k])]
            right = self.table[(s, calc.labels[k2])]
            out = out + inv.apply(coeff) * geo.tensor_L(left, right)
        return out

    def nabla(self, form: Form) -> TensorForm:
        """nabla(w) = vtheta (x)_A w - sum_s theta^s (x)_A V_s(w)."""
        geo = self.geometry
        calc = geo.calculus
        out = geo.tensor_A(calc.inner_form(), form)
        for s in calc.labels:
            out = out - geo.tensor_A(calc.theta(s), self.transport(s, form))
        return out

    def torsion(self, form: Form) -> Form:
        """d(w) minus the wedge projection of nabla(w)."""
        return self.geometry.calculus.d(form) - \
            self.geometry.wedge_project(self.nabla(form))

    def metric_compatible(self, metric: TensorForm):
        """None when V_s(g) = g for every direction, else a witness."""
        for s in self.geometry.calculus.labels:
            moved = self.transport_tensor(s, metric)
            diff = moved - metric
            if not diff.is_zero():
                return (s, diff)
        return None
