import sys

from vfsim.cli import main

sys.exit(main())
