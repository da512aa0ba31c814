import sys

from fracostro.cli import main

sys.exit(main())
