"""Smoke test for the polyheat extension module."""

import math

import polyheat as ph


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


circle = ph.Manifold.circle(1.0)
close(circle.distance([0.1], [6.2]), 2 * math.pi - 6.1, 1e-12)
close(ph.spectral_trace(circle, 0.5), 2.506628, 1e-6)

kernel = ph.StepKernel(ph.Bundle(circle), "v")
steps = ph.uniform_partition(0.5, 32)
close(ph.trace_estimate(kernel, steps, 256), 2.506628, 0.01 * 2.506628)

k = ph.heat_kernel_matrix(kernel, ph.uniform_partition(0.5, 16), 128)
close(k[5][5], ph.spectral_kernel(circle, 0.5, [2 * math.pi * 5 / 128], [2 * math.pi * 5 / 128]), 1e-4)

v = ph.compose_apply(kernel, steps, 256, lambda x: math.cos(x[0]))
nodes, _ = circle.grid(256)
err = max(abs(v[i][0] - math.exp(-0.5) * math.cos(nodes[i][0])) for i in range(256))
assert err < 2e-3, err

sphere = ph.Manifold.sphere()
close(sphere.volume_distortion([0, 0, 1], [1, 0, 0]), 2 / math.pi, 1e-12)
w = ph.StepKernel(ph.Bundle(sphere), "w-hat")
close(w(0.1, [0, 0, 1], [0, 0, 1])[0][0].real, math.exp(0.2 / 3) / (0.4 * math.pi), 1e-12)

tangent = ph.Bundle(sphere, rank=2, connection="levi-civita")
hol = tangent.holonomy([[0, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [1.0, 1.0, 1.0])
close(abs(hol[0][0] + hol[1][1]), 0.0, 1e-10)

demo = ph.StepKernel(ph.Bundle(circle, rank=2, connection="rotation", form=[0.35], potential="matrix-demo"))
violation, _ = ph.hsu_compare(demo, ph.uniform_partition(0.5, 8), 64)
assert violation <= 1e-10, violation

torus = ph.Manifold.torus([1.0, 1.0])
mc = ph.StepKernel(ph.Bundle(torus), "lambda:-1:nocut")
est = ph.compose_apply_mc(mc, ph.uniform_partition(0.1, 16), lambda x: math.cos(2 * math.pi * x[0]), [0.1, 0.3], 20000, seed=7)
exact = math.exp(-4 * math.pi**2 * 0.1) * math.cos(2 * math.pi * 0.1)
assert abs(est["mean"][0].real - exact) < 4 * est["stderr"][0], (est, exact)

lhs, rhs, diff = ph.gauss_moment_check([1, 0, 0, 1], 2, lambda t, xi: 1.0, 0.01)
close(lhs, 0.04, 1e-12)
close(rhs, 0.04, 1e-12)

try:
    ph.Bundle(circle, rank=3, potential="matrix-demo")
except ValueError:
    pass
else:
    raise AssertionError("rank mismatch accepted")

print("smoke test passed")
