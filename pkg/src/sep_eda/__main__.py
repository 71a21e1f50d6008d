import sys

from sep_eda.cli import main

sys.exit(main())
