"""Independent arbitrary-precision values frozen into test_expr.cpp."""
import mpmath as mp

mp.mp.dps = 40
print("x^2*y + exp(x) at (1,2):", mp.nstr(mp.mpf(1) ** 2 * 2 + mp.e, 20))

# Central finite difference (h = 1e-5) of -sin(t)cos(t) at t = 0.7, evaluated in high precision.
f = lambda t: -mp.sin(t) * mp.cos(t)
h = mp.mpf("1e-5")
t = mp.mpf("0.7")
print("FD d/dtheta -sin cos at 0.7:", mp.nstr((f(t + h) - f(t - h)) / (2 * h), 20))
print("sin^2 0.7 - cos^2 0.7:     ", mp.nstr(mp.sin(t) ** 2 - mp.cos(t) ** 2, 20))
g = lambda t: mp.sin(t) ** 2
t = mp.pi / 4
print("FD d/dtheta sin^2 at pi/4:", mp.nstr((g(t + h) - g(t - h)) / (2 * h), 20))
