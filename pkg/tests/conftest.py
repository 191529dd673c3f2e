import numpy as np
import pytest

from it2mof import expr as ex
from it2mof.model import IT2MembershipSpec, IT2Plant, MembershipRule


def example_plant_spec():
    return IT2MembershipSpec(
        rules=(
            MembershipRule(ex.parse("(x1+3)/10"), ex.parse("(x1+4)/10"),
                           ex.parse("sin(0.4*x1)^2")),
            MembershipRule(ex.parse("0.4"), ex.parse("0.5"), ex.parse("0.5")),
            MembershipRule(ex.parse("(-x1+3)/10"), ex.parse("(-x1+5)/10"),
                           ex.parse("1-sin(0.4*x1)^2")),
        ),
        premise=("x1",), premise_index=(0,),
        domain_lo=(-4.0,), domain_hi=(4.0,),
    )


def example_ctrl_spec():
    return IT2MembershipSpec(
        rules=(
            MembershipRule(ex.parse("(y1+3)/10"), ex.parse("(y1+4)/10"),
                           ex.parse("sin(0.4*y1)^2")),
            MembershipRule(ex.parse("(-y1+3)/10"), ex.parse("(-y1+5)/10"),
                           ex.parse("0.5")),
            MembershipRule(residual=True),
        ),
        premise=("y1",), premise_index=(0,),
        domain_lo=(-4.0,), domain_hi=(4.0,),
    )


def example_plant():
    return IT2Plant(
        a=[[[1.1, 0.0], [-0.3, 0.3]],
           [[0.86, 0.0], [-0.2, 0.1]],
           [[1.1, 0.0], [-0.3, 0.3]]],
        bu=[[[1.1], [0.3]], [[1.2], [0.6]], [[1.1], [0.3]]],
        bd=[[[1.0], [1.0]]] * 3,
        cy=[[[1.0, 0.0]]] * 3,
        cz=[[[0.05, 0.0]]] * 3,
        memberships=example_plant_spec(),
    )


@pytest.fixture(scope="session")
def plant():
    return example_plant()


@pytest.fixture(scope="session")
def plant_spec():
    return example_plant_spec()


@pytest.fixture(scope="session")
def ctrl_spec():
    return example_ctrl_spec()


def random_membership_spec(rng, n_rules, prefix, n_prem=1, residual=False):
    """A random valid interval membership spec over [-2, 2] boxes.

    Bounds are built as clamped affine functions a*x+b with lower <= upper by
    construction; the blend is a bounded trig expression.
    """
    rules = []
    names = tuple(f"{prefix}{i+1}" for i in range(n_prem))
    for r in range(n_rules - int(residual)):
        v = names[int(rng.integers(n_prem))]
        a = round(float(rng.uniform(-0.2, 0.2)), 3)
        b = round(float(rng.uniform(0.25, 0.6)), 3)
        gap = round(float(rng.uniform(0.05, 0.3)), 3)
        lower = f"{b} + {a}*{v}"
        upper = f"{b} + {a}*{v} + {gap}"
        blend = f"sin({round(float(rng.uniform(0.2, 1.0)), 3)}*{v})^2"
        rules.append(MembershipRule(ex.parse(lower), ex.parse(upper),
                                    ex.parse(blend)))
    if residual:
        rules.append(MembershipRule(residual=True))
    return IT2MembershipSpec(
        rules=tuple(rules), premise=names,
        premise_index=tuple(range(n_prem)),
        domain_lo=(-2.0,) * n_prem, domain_hi=(2.0,) * n_prem,
    )


def random_plant(rng, nx=2, nu=1, nd=1, ny=1, nz=1, n_rules=2, stable=True):
    scale = 0.7 if stable else 1.05
    a = rng.uniform(-1, 1, (n_rules, nx, nx))
    for i in range(n_rules):
        s = max(abs(np.linalg.eigvals(a[i])))
        if s > 0:
            a[i] *= scale / s
    return IT2Plant(
        a=a,
        bu=rng.uniform(-1, 1, (n_rules, nx, nu)),
        bd=rng.uniform(-1, 1, (n_rules, nx, nd)),
        cy=rng.uniform(-1, 1, (n_rules, ny, nx)),
        cz=rng.uniform(-1, 1, (n_rules, nz, nx)),
        memberships=random_membership_spec(rng, n_rules, "x", n_prem=1),
    )
