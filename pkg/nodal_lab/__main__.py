import sys

from nodal_lab.cli import main

sys.exit(main())
