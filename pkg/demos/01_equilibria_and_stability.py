"""Where does a delay reservoir operate, and is that point stable?

The Ikeda kernel below has three equilibria. The outer two satisfy
|f'(x0)| < 1 and are certified; the middle one is not. The connectivity
matrix built at each point shows that the row-sum norm bound and the
spectral radius agree with the certificate.

Run with ``python3 demos/01_equilibria_and_stability.py``.
"""

from tdrc.kernels import Ikeda, find_equilibria
from tdrc.reservoir import ReservoirConfig
from tdrc.varmodel import (char_poly_spectral_radius, connectivity, row_sum_norm,
                           spectral_radius)

kernel = Ikeda(eta=1.2443, gamma=1.4762, phi=0.1161)
cfg = ReservoirConfig(N=20, d=0.2581)

print(f"{'x0':>10} {'f_prime':>9} {'certificate':>32} {'norm':>7} {'rho':>7} {'rho_poly':>9}")
for eq in find_equilibria(kernel):
    A = connectivity(cfg, kernel, eq.x0)
    phi = (1 - cfg.decay) * eq.derivative
    print(f"{eq.x0:10.6f} {eq.derivative:9.4f} {eq.certificate.value:>32} "
          f"{row_sum_norm(A):7.4f} {spectral_radius(A):7.4f} "
          f"{char_poly_spectral_radius(cfg, phi):9.4f}")

# A single neuron is the one case where the norm bound and the slope
# condition part ways: its norm is |(1 - e) f' + e|, below one for slopes
# down to -(1 + e) / (1 - e).
one = ReservoirConfig(N=1, d=0.5)
edge = -(1 + one.decay) / (1 - one.decay)
print(f"\nN=1, d=0.5: the norm stays below one for f' in ({edge:.3f}, 1)")
