import sys

from clvq.cli import main

sys.exit(main())
