"""Average uplink rate against antenna count at 20 dB: K = 4, 7 with N = 3, and N = 2, 4 with K = 7."""
from _common import parser, print_table, run_and_save

from asyncpilot.model import SystemConfig
from asyncpilot.montecarlo import SweepSpec

MS = (32, 64, 128, 256, 512)

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    for K, N in ((4, 3), (7, 3), (7, 2), (7, 4)):
        spec = SweepSpec("M", MS, SystemConfig(K=K, N=N, gamma=100.0), args.trials)
        print(f"\nK={K} N={N} 20 dB")
        print_table(run_and_save(spec, args, f"rate_vs_m_K{K}_N{N}"), "M")
