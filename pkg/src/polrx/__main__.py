import sys

from polrx.cli import main

sys.exit(main())
