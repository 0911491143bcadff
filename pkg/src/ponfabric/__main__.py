import sys

from ponfabric.cli import main

sys.exit(main())
