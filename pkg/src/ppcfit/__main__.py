import sys

from ppcfit.cli import main

sys.exit(main())
