"""Average uplink rate against SNR, all three training arms, N = 2 and 4, K = 7."""
from _common import parser, print_table, run_and_save

from asyncpilot.model import SystemConfig
from asyncpilot.montecarlo import SweepSpec

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--M", type=int, default=100)
    args = p.parse_args()
    for N in (2, 4):
        spec = SweepSpec("snr_db", tuple(range(0, 35, 5)), SystemConfig(K=7, N=N, M=args.M), args.trials)
        print(f"\nK=7 N={N} M={args.M}")
        print_table(run_and_save(spec, args, f"rate_vs_snr_N{N}"), "snr_db")
