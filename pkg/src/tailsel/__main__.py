import sys

from tailsel.cli import main

sys.exit(main())
