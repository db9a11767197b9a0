import sys

from uets.cli import main

sys.exit(main())
