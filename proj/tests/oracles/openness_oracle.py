"""Closed-form end-point deviation of example-3 along u_ref + a*v, v = (2 pi sin 2 pi t, 1)."""
import sympy as sp

t, s, a = sp.symbols("t s a", real=True)
u1 = a * 2 * sp.pi * sp.sin(2 * sp.pi * s)
u2 = 1 + a
x1 = sp.integrate(u1, (s, 0, t))
x2 = sp.integrate((1 - x1) * u2, (t, 0, 1))
x3 = sp.integrate(x1**3 * u2, (t, 0, 1))
print(sp.simplify(x1.subs(t, 1)), sp.factor(sp.simplify(x2 - 1)), sp.factor(sp.simplify(x3)))
