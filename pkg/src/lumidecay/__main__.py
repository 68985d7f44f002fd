import sys

from lumidecay.cli import main

sys.exit(main())
