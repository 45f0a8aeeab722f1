"""
Convergence tables
==================

The heat case has an exact answer, a single decaying cosine. The full
system does not, so successive meshes are compared pairwise instead.
"""

from volfill.analysis import convergence_study, flux_self_convergence, form_discrepancy, heat_mode_error
from volfill.coefficients import from_pairs

h = [1 / 50, 1 / 100, 1 / 200, 1 / 400]
# dt = h^2 so the first-order time error stays below the spatial one
space = convergence_study(lambda x: heat_mode_error(round(1 / x), x * x, 0.05), h)
print("heat mode, dt = h^2")
for row in space.rows():
    print(f"  h = {row['h']:.5f}  error {row['error']:.3e}  order {row['order']:.3f}")

time = convergence_study(lambda dt: heat_mode_error(400, dt, 0.1), [0.02, 0.01, 0.005, 0.0025])
print("heat mode, 400 cells, varying dt")
for row in time.rows():
    print(f"  dt = {row['h']:.4f}  error {row['error']:.3e}  order {row['order']:.3f}")

c = from_pairs(2, {(0, 1): 1.0, (0, 2): 1.1, (1, 2): 0.95})
rich = flux_self_convergence(c, [25, 50, 100, 200], t_end=0.02, dt=2e-3)
print("full system, ||u_h - R u_{h/2}||")
for row, ratio in zip(rich.rows(), [float("nan")] + list(rich.ratios)):
    print(f"  h = {row['h']:.4f}  difference {row['error']:.3e}  ratio {ratio:.3f}")

# with arithmetic face averages the flux and strong forms coincide at the
# Picard fixed point, so their gap is round-off rather than O(h^2)
print(f"flux vs strong form, 100 cells: {form_discrepancy(c, 100, 0.02, 2e-3):.1e}")
