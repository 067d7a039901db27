import sys

from asyncpilot.cli import main

sys.exit(main())
