import sys

from cesqkd.cli import main

sys.exit(main())
