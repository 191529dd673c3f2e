"""Affine symmetric-block matrix inequalities for the controller synthesis.

Two condition sets are assembled over named decision variables:

* the membership-independent set: one positive-definiteness condition on the
  stacked Lyapunov matrix and one negativity condition per rule triple
  (plant i, controller j, plant k);
* the membership-dependent relaxation: corner-wise conditions over a grid
  partition of the premise domains with per-triple slack matrices.

Everything is affine by construction.  Two bilinearities of the raw
conditions are removed exactly by substitution: the squared attenuation
level is a single variable ``gamma2``, and the trigger matrix appears only
through ``omega_bar`` (the trigger matrix scaled by ``1/nu + delta``), from
which the trigger matrix is recovered after solving.

The trigger-error diagonal uses per-slot certification weights
``blkdiag(w_kappa*omega_bar, ..., w_1*omega_bar)``.  A flat weighted-sum
form makes that block rank deficient, which is never strictly feasible for
memory depth above one; the per-slot weights default to the trigger weights
floored away from zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex

__all__ = [
    "DecisionVar",
    "BlockExpr",
    "LmiConstraint",
    "LmiProgram",
    "SynthesisGivens",
    "FouPartition",
    "LmiAssemblyError",
    "make_variables",
    "assemble_psi",
    "assemble_theorem1",
    "compute_fou_bounds",
    "assemble_theorem2",
    "verify_design",
    "dump_program",
    "psi_dimension",
]


class LmiAssemblyError(Exception):
    pass


# ---------------------------------------------------------------------------
# decision variables and affine block expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionVar:
    name: str
    shape: tuple[int, ...]   # () scalar, (n, n) otherwise
    kind: str                # "sym" | "mat" | "scalar"
    lower: float | None = None  # scalar lower bound
    psd: bool = False           # nonstrict positive semidefiniteness

    @property
    def size(self):
        return 1 if self.kind == "scalar" else self.shape[0] * self.shape[1]


@dataclass(frozen=True)
class _Term:
    row: int
    col: int
    kind: str                 # "const" | "lin" | "scalar"
    coeff: float = 1.0
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    var: DecisionVar | None = None
    trans: bool = False
    const: np.ndarray | None = None
    pattern: np.ndarray | None = None
    mirror: bool = False      # also add the transpose at (col, row)


class BlockExpr:
    """Affine symmetric matrix expression over a fixed block segmentation."""

    def __init__(self, segs, name=""):
        self.segs = tuple(int(s) for s in segs)
        self.offsets = np.concatenate([[0], np.cumsum(self.segs)])
        self.n = int(self.offsets[-1])
        self.name = name
        self.terms: list[_Term] = []

    def _check(self, row, col, rows, cols):
        if not (0 <= row < len(self.segs) and 0 <= col < len(self.segs)):
            raise LmiAssemblyError(f"{self.name}: no block ({row},{col})")
        if rows != self.segs[row] or cols != self.segs[col]:
            raise LmiAssemblyError(
                f"{self.name}: block ({row},{col}) expects "
                f"{self.segs[row]}x{self.segs[col]}, got {rows}x{cols}")

    def add_const(self, row, col, value):
        value = np.atleast_2d(np.asarray(value, dtype=float))
        self._check(row, col, *value.shape)
        self.terms.append(_Term(row, col, "const", const=value, mirror=row != col))

    def add_lin(self, row, col, coeff, left, var, right, trans=False):
        if coeff == 0.0:
            return
        left = np.atleast_2d(np.asarray(left, dtype=float))
        right = np.atleast_2d(np.asarray(right, dtype=float))
        vr, vc = var.shape if not trans else var.shape[::-1]
        if left.shape[1] != vr or right.shape[0] != vc:
            raise LmiAssemblyError(
                f"{self.name}: term at ({row},{col}) has inner shapes "
                f"{left.shape} @ {var.name}{'T' if trans else ''}{var.shape} @ {right.shape}")
        self._check(row, col, left.shape[0], right.shape[1])
        self.terms.append(_Term(row, col, "lin", coeff=coeff, left=left,
                                var=var, right=right, trans=trans,
                                mirror=row != col))

    def add_scalar(self, row, col, pattern, var):
        pattern = np.atleast_2d(np.asarray(pattern, dtype=float))
        self._check(row, col, *pattern.shape)
        self.terms.append(_Term(row, col, "scalar", pattern=pattern, var=var,
                                mirror=row != col))

    def numeric(self, values):
        """Evaluate to a dense symmetric matrix for a variable assignment."""
        out = np.zeros((self.n, self.n))
        for t in self.terms:
            r0, c0 = self.offsets[t.row], self.offsets[t.col]
            if t.kind == "const":
                val = t.const
            elif t.kind == "scalar":
                val = t.pattern * float(values[t.var.name])
            else:
                v = np.atleast_2d(np.asarray(values[t.var.name], dtype=float))
                if t.trans:
                    v = v.T
                val = t.coeff * (t.left @ v @ t.right)
            out[r0:r0 + val.shape[0], c0:c0 + val.shape[1]] += val
            if t.mirror:
                r1, c1 = self.offsets[t.col], self.offsets[t.row]
                out[r1:r1 + val.shape[1], c1:c1 + val.shape[0]] += val.T
        return out

    def cvxpy(self, varmap):
        """Compile to a cvxpy expression (dense block grid then bmat)."""
        import cvxpy as cp

        k = len(self.segs)
        grid = [[None] * k for _ in range(k)]

        def acc(r, c, e):
            grid[r][c] = e if grid[r][c] is None else grid[r][c] + e

        for t in self.terms:
            if t.kind == "const":
                val = cp.Constant(t.const)
            elif t.kind == "scalar":
                val = cp.multiply(varmap[t.var.name], cp.Constant(t.pattern))
            else:
                v = varmap[t.var.name]
                if t.trans:
                    v = v.T
                val = t.coeff * (cp.Constant(t.left) @ v @ cp.Constant(t.right))
            acc(t.row, t.col, val)
            if t.mirror:
                acc(t.col, t.row, val.T)
        blocks = [
            [grid[r][c] if grid[r][c] is not None
             else np.zeros((self.segs[r], self.segs[c]))
             for c in range(k)]
            for r in range(k)
        ]
        return cp.bmat(blocks)

    def check_symmetry(self, values):
        m = self.numeric(values)
        return float(np.max(np.abs(m - m.T)))


@dataclass
class LmiConstraint:
    """sum(coeff * part) {<, >} 0 with parts block expressions or whole-size
    symmetric variables; ``strict`` applies the solver's margin shift."""

    name: str
    size: int
    parts: list  # (coeff, BlockExpr | DecisionVar)
    sense: str   # "<" or ">"
    strict: bool = True

    def numeric(self, values):
        out = np.zeros((self.size, self.size))
        for coeff, part in self.parts:
            if isinstance(part, BlockExpr):
                out += coeff * part.numeric(values)
            else:
                out += coeff * np.asarray(values[part.name], dtype=float)
        return out

    def cvxpy(self, varmap):
        import cvxpy as cp

        acc = None
        for coeff, part in self.parts:
            e = part.cvxpy(varmap) if isinstance(part, BlockExpr) else varmap[part.name]
            e = coeff * e
            acc = e if acc is None else acc + e
        return acc


@dataclass
class LmiProgram:
    variables: dict
    constraints: list
    objective: str = "gamma2"
    meta: dict = field(default_factory=dict)

    def scalar_rows(self):
        """Conic rows after symmetric vectorization of every constraint."""
        return sum(c.size * (c.size + 1) // 2 for c in self.constraints)

    def random_assignment(self, rng):
        values = {}
        for v in self.variables.values():
            if v.kind == "scalar":
                values[v.name] = float(rng.uniform(0.1, 2.0))
            elif v.kind == "sym":
                m = rng.standard_normal(v.shape)
                values[v.name] = (m + m.T) / 2
            else:
                values[v.name] = rng.standard_normal(v.shape)
        return values


# ---------------------------------------------------------------------------
# synthesis givens
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthesisGivens:
    """Fixed scalars and structure matrices of the synthesis conditions."""

    rho: float
    nu: float
    mu: float
    kappa: int
    varrho: tuple[float, ...]       # trigger weights, h = 1..kappa
    xi_bar: float
    xi_var: float
    alpha_f: float
    hslash: float
    theta: float = 1.0
    e_scalars: tuple[float, ...] = ()   # kappa-1 stacked multiples of I_nx
    f_scalar: float = 1.0
    lmi_varrho: tuple[float, ...] | None = None  # certification weights
    varrho_floor: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must be in (0,1), got {self.mu}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if not 0.0 <= self.alpha_f <= 1.0:
            raise ValueError(f"alpha_f must be in [0,1], got {self.alpha_f}")
        if not 0.0 < self.hslash < 1.0:
            raise ValueError(f"hslash must be in (0,1), got {self.hslash}")
        if not self.theta > 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.xi_var < 0.0:
            raise ValueError(f"fading variance must be >= 0, got {self.xi_var}")
        varrho = tuple(float(v) for v in self.varrho)
        object.__setattr__(self, "varrho", varrho)
        if len(varrho) != self.kappa:
            raise ValueError(f"need {self.kappa} trigger weights, got {len(varrho)}")
        e = tuple(float(v) for v in self.e_scalars)
        if len(e) > self.kappa - 1:
            e = e[:self.kappa - 1]
        elif len(e) < self.kappa - 1:
            pad = e[0] if e else 0.01
            e = e + (pad,) * (self.kappa - 1 - len(e))
        object.__setattr__(self, "e_scalars", e)
        if self.lmi_varrho is None:
            w = np.maximum(varrho, self.varrho_floor)
            object.__setattr__(self, "lmi_varrho", tuple(w / w.sum()))
        else:
            w = tuple(float(v) for v in self.lmi_varrho)
            if len(w) != self.kappa or any(v <= 0 for v in w):
                raise ValueError("certification weights must be kappa positive scalars")
            object.__setattr__(self, "lmi_varrho", w)

    @property
    def xi_std(self):
        return math.sqrt(self.xi_var)

    def ef_matrix(self, nx):
        """Stacked structure matrix [E; F] (kappa*nx by nx)."""
        blocks = [s * np.eye(nx) for s in self.e_scalars]
        blocks.append(self.f_scalar * np.eye(nx))
        return np.vstack(blocks)


def psi_dimension(nx, ny, nu, nd, kappa):
    return kappa * nx + kappa * ny + nd + 1 + kappa * nx + kappa * nx + nu


# ---------------------------------------------------------------------------
# variable registry and block assembly
# ---------------------------------------------------------------------------

def make_variables(nx, ny, nu, n_ctrl_rules, kappa, mfd_sizes=None):
    """Register the decision variables; ``mfd_sizes`` adds slack matrices."""
    names = {}

    def add(var):
        names[var.name] = var
        return var

    if kappa > 1:
        add(DecisionVar("P11", ((kappa - 1) * nx, (kappa - 1) * nx), "sym"))
        add(DecisionVar("P12", ((kappa - 1) * nx, nx), "mat"))
    add(DecisionVar("P22", (nx, nx), "sym"))
    add(DecisionVar("omega_bar", (ny, ny), "sym"))
    add(DecisionVar("delta", (), "scalar", lower=1e-6))
    add(DecisionVar("gamma2", (), "scalar", lower=1e-9))
    for j in range(n_ctrl_rules):
        add(DecisionVar(f"zeta_{j}", (nu, nu), "mat"))
        for h in range(1, kappa + 1):
            add(DecisionVar(f"eta_{j}_{h}", (nu, ny), "mat"))
    if mfd_sizes is not None:
        n_psi, triples, wp = mfd_sizes
        add(DecisionVar("W", (n_psi, n_psi), "sym"))
        for (i, j, k) in triples:
            for ell in range(wp):
                add(DecisionVar(f"M_{i}_{j}_{k}_{ell}", (n_psi, n_psi), "sym",
                                psd=True))
    return names


def _ptilde_parts(variables, nx, kappa):
    """[(left, var, right, trans)] with P-tilde = sum(left @ var? @ right)."""
    n = kappa * nx
    u2 = np.zeros((n, nx))
    u2[(kappa - 1) * nx:, :] = np.eye(nx)
    parts = [(u2, variables["P22"], u2.T, False)]
    if kappa > 1:
        u1 = np.zeros((n, (kappa - 1) * nx))
        u1[:(kappa - 1) * nx, :] = np.eye((kappa - 1) * nx)
        parts += [
            (u1, variables["P11"], u1.T, False),
            (u1, variables["P12"], u2.T, False),
            (u2, variables["P12"], u1.T, True),
        ]
    return parts


def _pright_parts(variables, nx, kappa):
    """[P12; P22] = sum(left @ var? ) as [(left, var, trans)]."""
    n = kappa * nx
    u2 = np.zeros((n, nx))
    u2[(kappa - 1) * nx:, :] = np.eye(nx)
    parts = [(u2, variables["P22"], False)]
    if kappa > 1:
        u1 = np.zeros((n, (kappa - 1) * nx))
        u1[:(kappa - 1) * nx, :] = np.eye((kappa - 1) * nx)
        parts.append((u1, variables["P12"], False))
    return parts


def _state_sel(nx, kappa, col):
    s = np.zeros((nx, kappa * nx))
    s[:, col * nx:(col + 1) * nx] = np.eye(nx)
    return s


def _eps_sel(ny, kappa, col):
    s = np.zeros((ny, kappa * ny))
    s[:, col * ny:(col + 1) * ny] = np.eye(ny)
    return s


def assemble_psi(i, j, k, plant, givens, variables, name=None):
    """The rule-triple condition matrix as an affine block expression.

    Block rows: stacked state, stacked trigger errors, disturbance, auxiliary
    variable, mean-dynamics completion, variance completion, multiplier.
    """
    nx, ny, nu, nd = plant.nx, plant.ny, plant.nu, plant.nd
    kappa = givens.kappa
    segs = (kappa * nx, kappa * ny, nd, 1, kappa * nx, kappa * nx, nu)
    psi = BlockExpr(segs, name=name or f"psi_{i}_{j}_{k}")

    hsel = _state_sel(nx, kappa, kappa - 1)       # picks the newest state
    cyk_h = plant.cy[k] @ hsel                    # (ny, kappa*nx)
    czi_h = plant.cz[i] @ hsel
    ef = givens.ef_matrix(nx)
    ef_bu = ef @ plant.bu[i]                      # (kappa*nx, nu)
    zeta = variables[f"zeta_{j}"]
    decay = 1.0 - givens.hslash

    # (0,0): -(1-hslash) P~ + rho * H' Cy' OmegaBar Cy H + Cz~' Cz~
    for left, var, right, trans in _ptilde_parts(variables, nx, kappa):
        psi.add_lin(0, 0, -decay, left, var, right, trans)
    psi.add_lin(0, 0, givens.rho, cyk_h.T, variables["omega_bar"], cyk_h)
    psi.add_const(0, 0, czi_h.T @ czi_h)

    # (1,1): -blkdiag_h(w_h OmegaBar), slot weights newest-last
    for c in range(kappa):
        h = kappa - c
        w = givens.lmi_varrho[h - 1]
        sel = _eps_sel(ny, kappa, c)
        psi.add_lin(1, 1, -w, sel.T, variables["omega_bar"], sel)

    # (2,2): -gamma2 I
    psi.add_scalar(2, 2, -np.eye(nd), variables["gamma2"])

    # (3,3): (mu - (1-hslash) + delta) / nu
    psi.add_const(3, 3, [[(givens.mu - decay) / givens.nu]])
    psi.add_scalar(3, 3, [[1.0 / givens.nu]], variables["delta"])

    # (4,0): history selector + mean closed-loop columns
    if kappa > 1:
        shift = np.zeros(((kappa - 1) * nx, kappa * nx))
        shift[:, nx:] = np.eye((kappa - 1) * nx)
        u1 = np.zeros((kappa * nx, (kappa - 1) * nx))
        u1[:(kappa - 1) * nx, :] = np.eye((kappa - 1) * nx)
        u2 = np.zeros((kappa * nx, nx))
        u2[(kappa - 1) * nx:, :] = np.eye(nx)
        psi.add_lin(4, 0, 1.0, u1, variables["P11"], shift)
        psi.add_lin(4, 0, 1.0, u2, variables["P12"], shift, trans=True)
    a_col = plant.a[i] @ _state_sel(nx, kappa, kappa - 1)
    for left, var, trans in _pright_parts(variables, nx, kappa):
        psi.add_lin(4, 0, 1.0, left, var, a_col, trans)
    for h in range(1, kappa + 1):
        coeff = givens.xi_bar * givens.alpha_f
        psi.add_lin(4, 0, coeff, ef_bu, variables[f"eta_{j}_{h}"],
                    plant.cy[k] @ _state_sel(nx, kappa, kappa - h))

    # (4,1): mean error columns (no output-matrix factor)
    for h in range(1, kappa + 1):
        coeff = -givens.xi_bar * givens.alpha_f
        psi.add_lin(4, 1, coeff, ef_bu, variables[f"eta_{j}_{h}"],
                    _eps_sel(ny, kappa, kappa - h))

    # (4,2): P~ Bd~
    for left, var, trans in _pright_parts(variables, nx, kappa):
        psi.add_lin(4, 2, 1.0, left, var, plant.bd[i], trans)

    # (4,4), (5,5): -P~
    for left, var, right, trans in _ptilde_parts(variables, nx, kappa):
        psi.add_lin(4, 4, -1.0, left, var, right, trans)
        psi.add_lin(5, 5, -1.0, left, var, right, trans)

    # (5,0)/(5,1): variance columns
    for h in range(1, kappa + 1):
        coeff = givens.xi_std * givens.alpha_f
        psi.add_lin(5, 0, coeff, ef_bu, variables[f"eta_{j}_{h}"],
                    plant.cy[k] @ _state_sel(nx, kappa, kappa - h))
        psi.add_lin(5, 1, -coeff, ef_bu, variables[f"eta_{j}_{h}"],
                    _eps_sel(ny, kappa, kappa - h))

    # (6,0)/(6,1): theta-scaled gain rows
    eye_nu = np.eye(nu)
    for h in range(1, kappa + 1):
        psi.add_lin(6, 0, givens.theta, eye_nu, variables[f"eta_{j}_{h}"],
                    plant.cy[k] @ _state_sel(nx, kappa, kappa - h))
        psi.add_lin(6, 1, -givens.theta, eye_nu, variables[f"eta_{j}_{h}"],
                    _eps_sel(ny, kappa, kappa - h))

    # (4,6)/(5,6): multiplier couplings, mirrored into row 6
    for scale, row in ((givens.xi_bar, 4), (givens.xi_std, 5)):
        coeff = scale * givens.alpha_f
        for left, var, trans in _pright_parts(variables, nx, kappa):
            psi.add_lin(row, 6, coeff, left, var, plant.bu[i], trans)
        psi.add_lin(row, 6, -coeff, ef_bu, zeta, eye_nu)

    # (6,6): -theta (zeta + zeta')
    psi.add_lin(6, 6, -givens.theta, eye_nu, zeta, eye_nu, trans=False)
    psi.add_lin(6, 6, -givens.theta, eye_nu, zeta, eye_nu, trans=True)
    return psi


def _ptilde_expr(variables, nx, kappa):
    e = BlockExpr((kappa * nx,), name="p_tilde")
    for left, var, right, trans in _ptilde_parts(variables, nx, kappa):
        e.add_lin(0, 0, 1.0, left, var, right, trans)
    return e


def _omega_expr(variables, ny):
    e = BlockExpr((ny,), name="omega_bar")
    e.add_lin(0, 0, 1.0, np.eye(ny), variables["omega_bar"], np.eye(ny))
    return e


def assemble_theorem1(plant, n_ctrl_rules, givens):
    """Membership-independent program: minimize gamma2 over all rule triples."""
    variables = make_variables(plant.nx, plant.ny, plant.nu, n_ctrl_rules,
                               givens.kappa)
    cons = [
        LmiConstraint("p_tilde_pd", givens.kappa * plant.nx,
                      [(1.0, _ptilde_expr(variables, plant.nx, givens.kappa))], ">"),
        LmiConstraint("omega_bar_pd", plant.ny,
                      [(1.0, _omega_expr(variables, plant.ny))], ">"),
    ]
    n_psi = psi_dimension(plant.nx, plant.ny, plant.nu, plant.nd, givens.kappa)
    for i in range(plant.n_rules):
        for j in range(n_ctrl_rules):
            for k in range(plant.n_rules):
                psi = assemble_psi(i, j, k, plant, givens, variables)
                cons.append(LmiConstraint(psi.name, n_psi, [(1.0, psi)], "<"))
    return LmiProgram(variables, cons, meta={
        "method": "mfi", "kappa": givens.kappa, "n_psi": n_psi,
        "n_plant_rules": plant.n_rules, "n_ctrl_rules": n_ctrl_rules,
    })


# ---------------------------------------------------------------------------
# footprint-of-uncertainty partition (membership-dependent relaxation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CornerCell:
    cell_x: tuple[int, ...]
    cell_y: tuple[int, ...]
    corner_x: tuple[int, ...]  # 0 = lower node, 1 = upper node per premise var
    corner_y: tuple[int, ...]
    lo: np.ndarray  # (p_rules, q_rules, p_rules)
    hi: np.ndarray


@dataclass(frozen=True)
class FouPartition:
    p_cells: int
    q_cells: int
    wp: int
    corners: tuple[CornerCell, ...]

    def __len__(self):
        return len(self.corners)


def compute_fou_bounds(plant_spec, ctrl_spec, p_cells, q_cells, wp=1):
    """Corner bounds of the triple membership product over a premise grid.

    Every premise axis is split uniformly; at each cell corner the product of
    lower (upper) membership values of the three rule factors gives the lower
    (upper) bound scalar.  All membership values are clamped to [0, 1].
    """
    if p_cells < 1 or q_cells < 1 or wp < 1:
        raise ValueError("partition counts must be positive")

    def axis_nodes(spec, cells):
        return [np.linspace(lo, hi, cells + 1)
                for lo, hi in zip(spec.domain_lo, spec.domain_hi)]

    def node_bounds(spec, axes, cell, corner):
        env = {name: float(axes[a][cell[a] + corner[a]])
               for a, name in enumerate(spec.premise)}
        lo, hi = spec.bound_values(env)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise LmiAssemblyError(f"non-finite membership bound at corner {env}")
        return lo, hi

    x_axes = axis_nodes(plant_spec, p_cells)
    y_axes = axis_nodes(ctrl_spec, q_cells)
    nwx, nwy = len(x_axes), len(y_axes)
    p_rules, q_rules = plant_spec.n_rules, ctrl_spec.n_rules
    corners = []
    for cell_x in itertools.product(range(p_cells), repeat=nwx):
        for cell_y in itertools.product(range(q_cells), repeat=nwy):
            for corner_x in itertools.product((0, 1), repeat=nwx):
                for corner_y in itertools.product((0, 1), repeat=nwy):
                    mlo, mhi = node_bounds(plant_spec, x_axes, cell_x, corner_x)
                    nlo, nhi = node_bounds(ctrl_spec, y_axes, cell_y, corner_y)
                    lo = np.einsum("i,j,k->ijk", mlo, nlo, mlo)
                    hi = np.einsum("i,j,k->ijk", mhi, nhi, mhi)
                    corners.append(CornerCell(cell_x, cell_y, corner_x,
                                              corner_y, lo, hi))
    return FouPartition(p_cells, q_cells, wp, tuple(corners))


def assemble_theorem2(plant, n_ctrl_rules, givens, partition,
                      max_scalar_rows=100_000):
    """Membership-dependent program with corner conditions and slack matrices."""
    n_psi = psi_dimension(plant.nx, plant.ny, plant.nu, plant.nd, givens.kappa)
    triples = [(i, j, k)
               for i in range(plant.n_rules)
               for j in range(n_ctrl_rules)
               for k in range(plant.n_rules)]
    variables = make_variables(plant.nx, plant.ny, plant.nu, n_ctrl_rules,
                               givens.kappa,
                               mfd_sizes=(n_psi, triples, partition.wp))
    psis = {t: assemble_psi(*t, plant, givens, variables) for t in triples}
    w_var = variables["W"]

    cons = [
        LmiConstraint("p_tilde_pd", givens.kappa * plant.nx,
                      [(1.0, _ptilde_expr(variables, plant.nx, givens.kappa))], ">"),
        LmiConstraint("omega_bar_pd", plant.ny,
                      [(1.0, _omega_expr(variables, plant.ny))], ">"),
    ]
    for t in triples:
        for ell in range(partition.wp):
            m_var = variables[f"M_{t[0]}_{t[1]}_{t[2]}_{ell}"]
            cons.append(LmiConstraint(
                f"m_psd_{t[0]}_{t[1]}_{t[2]}_{ell}", n_psi,
                [(1.0, m_var)], ">", strict=False))
            cons.append(LmiConstraint(
                f"relax_{t[0]}_{t[1]}_{t[2]}_{ell}", n_psi,
                [(1.0, psis[t]), (-1.0, m_var), (1.0, w_var)], "<"))
    for idx, corner in enumerate(partition.corners):
        for ell in range(partition.wp):
            parts = []
            lo_sum = 0.0
            for t in triples:
                lo = float(corner.lo[t])
                hi = float(corner.hi[t])
                lo_sum += lo
                if lo != 0.0:
                    parts.append((lo, psis[t]))
                if hi - lo != 0.0:
                    parts.append((hi - lo, variables[f"M_{t[0]}_{t[1]}_{t[2]}_{ell}"]))
            if abs(lo_sum - 1.0) > 1e-15:
                parts.append((lo_sum - 1.0, w_var))
            cons.append(LmiConstraint(f"corner_{idx}_{ell}", n_psi, parts, "<"))

    program = LmiProgram(variables, cons, meta={
        "method": "mfd", "kappa": givens.kappa, "n_psi": n_psi,
        "n_plant_rules": plant.n_rules, "n_ctrl_rules": n_ctrl_rules,
        "partition": {"p": partition.p_cells, "q": partition.q_cells,
                      "wp": partition.wp, "corners": len(partition)},
    })
    rows = program.scalar_rows()
    if rows > max_scalar_rows:
        raise LmiAssemblyError(
            f"partition produces {rows} scalar constraint rows "
            f"(cap {max_scalar_rows}); coarsen the grid or raise the cap")
    return program


# ---------------------------------------------------------------------------
# post-hoc numerical verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    p_tilde_min_eig: float
    omega_min_eig: float
    gain_residual: float
    max_weighted_eig: float       # over sampled premise points
    max_reduced_eig: float        # multiplier eliminated (congruence identity)
    n_samples: int
    violations: list

    @property
    def ok(self):
        return not self.violations


def verify_design(values, plant, ctrl_spec, givens, n_samples=1000, seed=0,
                  gains=None):
    """Substitute solved numerics and check the certified inequalities.

    Samples premise points, forms membership-weighted sums of the per-triple
    condition matrices and checks their top eigenvalue; also checks the
    positive-definiteness certificates and gain recovery consistency, and the
    equivalent reduced form with the multiplier block eliminated.
    """
    rng = np.random.default_rng(seed)
    violations = []
    nx, ny, nu, nd = plant.nx, plant.ny, plant.nu, plant.nd
    kappa = givens.kappa
    q = ctrl_spec.n_rules

    variables = make_variables(nx, ny, nu, q, kappa)
    ptilde = _ptilde_expr(variables, nx, kappa).numeric(values)
    p_eig = float(np.linalg.eigvalsh(ptilde).min())
    if p_eig <= 0:
        violations.append(f"stacked Lyapunov matrix not positive definite "
                          f"(min eig {p_eig:.3e})")
    om_eig = float(np.linalg.eigvalsh(np.atleast_2d(values["omega_bar"])).min())
    if om_eig <= 0:
        violations.append(f"trigger certificate not positive definite "
                          f"(min eig {om_eig:.3e})")
    if float(values["delta"]) <= 0:
        violations.append(f"delta not positive: {values['delta']}")

    gain_residual = 0.0
    if gains is not None:
        for j in range(q):
            zeta = np.atleast_2d(values[f"zeta_{j}"])
            for h in range(1, kappa + 1):
                eta = np.atleast_2d(values[f"eta_{j}_{h}"])
                resid = np.linalg.norm(zeta @ gains[j, h - 1] - eta)
                rel = resid / max(np.linalg.norm(eta), 1e-30)
                gain_residual = max(gain_residual, rel)
        if gain_residual > 1e-8:
            violations.append(f"gain recovery residual {gain_residual:.3e} > 1e-8")

    psi_num = {}
    for i in range(plant.n_rules):
        for j in range(q):
            for k in range(plant.n_rules):
                psi_num[(i, j, k)] = assemble_psi(
                    i, j, k, plant, givens, variables).numeric(values)

    n5 = kappa * nx + kappa * ny + nd + 1 + 2 * kappa * nx
    neps = kappa * nx + kappa * ny

    def reduced(mat, j):
        # bottom row = W' + theta * Y with Y supported on the first block
        # columns and W on the completion columns; eliminating the multiplier
        # block must reproduce a negative definite five-block form.
        m5 = mat[:n5, :n5]
        bottom = mat[n5:, :n5]
        y_row = np.zeros_like(bottom)
        y_row[:, :neps] = bottom[:, :neps] / givens.theta
        w_col = bottom.T.copy()
        w_col[:neps, :] = 0.0
        zeta = np.atleast_2d(values[f"zeta_{j}"])
        corr = w_col @ np.linalg.solve(zeta, y_row)
        return m5 + corr + corr.T

    max_weighted = -math.inf
    max_reduced = -math.inf
    pl_spec = plant.memberships
    for _ in range(n_samples):
        x = np.array([rng.uniform(lo, hi) for lo, hi in
                      zip(pl_spec.domain_lo, pl_spec.domain_hi)])
        y = np.array([rng.uniform(lo, hi) for lo, hi in
                      zip(ctrl_spec.domain_lo, ctrl_spec.domain_hi)])
        xv = np.zeros(nx)
        for a, idx in enumerate(pl_spec.premise_index):
            xv[idx] = x[a]
        yv = np.zeros(ny)
        for a, idx in enumerate(ctrl_spec.premise_index):
            yv[idx] = y[a]
        m = pl_spec.normalized(xv).weights
        n = ctrl_spec.normalized(yv).weights
        acc = np.zeros_like(psi_num[(0, 0, 0)])
        acc_red = None
        for (i, j, k), mat in psi_num.items():
            w = m[i] * n[j] * m[k]
            if w == 0.0:
                continue
            acc += w * mat
            red = reduced(mat, j)
            acc_red = w * red if acc_red is None else acc_red + w * red
        max_weighted = max(max_weighted, float(np.linalg.eigvalsh(acc).max()))
        max_reduced = max(max_reduced, float(np.linalg.eigvalsh(acc_red).max()))
    if max_weighted >= 0:
        violations.append(
            f"membership-weighted condition not negative definite at a sampled "
            f"premise point (max eig {max_weighted:.3e})")
    if max_reduced >= 0:
        violations.append(
            f"reduced (multiplier-eliminated) condition not negative definite "
            f"(max eig {max_reduced:.3e})")
    return VerificationReport(p_eig, om_eig, gain_residual, max_weighted,
                              max_reduced, n_samples, violations)


# ---------------------------------------------------------------------------
# portable text dump
# ---------------------------------------------------------------------------

def dump_program(program, buf):
    """Write the variable table and sparse block triplets for diffing."""

    def fmt(a):
        return "[" + ";".join(",".join(repr(float(v)) for v in row)
                              for row in np.atleast_2d(a)) + "]"

    buf.write(f"objective minimize {program.objective}\n")
    buf.write(f"meta {program.meta}\n")
    buf.write("variables\n")
    for v in program.variables.values():
        extra = f" lower={v.lower}" if v.lower is not None else ""
        extra += " psd" if v.psd else ""
        buf.write(f"  {v.name} {v.kind} {v.shape}{extra}\n")
    for c in program.constraints:
        buf.write(f"constraint {c.name} size={c.size} sense{c.sense}0 "
                  f"strict={c.strict}\n")
        for coeff, part in c.parts:
            if isinstance(part, BlockExpr):
                buf.write(f"  block-expr coeff={coeff!r} segs={part.segs}\n")
                for t in part.terms:
                    r0, c0 = part.offsets[t.row], part.offsets[t.col]
                    tag = "+mirror" if t.mirror else ""
                    if t.kind == "const":
                        buf.write(f"    const @({r0},{c0}){tag} {fmt(t.const)}\n")
                    elif t.kind == "scalar":
                        buf.write(f"    scalar @({r0},{c0}){tag} {t.var.name} "
                                  f"{fmt(t.pattern)}\n")
                    else:
                        trans = "'" if t.trans else ""
                        buf.write(
                            f"    lin @({r0},{c0}){tag} {t.coeff!r} * "
                            f"{fmt(t.left)} @ {t.var.name}{trans} @ {fmt(t.right)}\n")
            else:
                buf.write(f"  var coeff={coeff!r} {part.name}\n")
