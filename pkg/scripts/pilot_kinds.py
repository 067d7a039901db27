"""Identity against normalized DFT pilots over M at 20 dB, K = 7, N = 3."""
from dataclasses import replace

from _common import parser, print_table, run_and_save

from asyncpilot.model import SystemConfig
from asyncpilot.montecarlo import SweepSpec

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    for kind in ("identity", "dft"):
        base = SystemConfig(K=7, N=3, gamma=100.0, pilot_kind=kind)
        spec = SweepSpec("M", (32, 64, 128, 256), base, args.trials)
        print(f"\n{kind} pilots")
        print_table(run_and_save(spec, args, f"pilot_{kind}"), "M")
