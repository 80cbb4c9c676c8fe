import sys

from nlpa_mimo.cli import main

sys.exit(main())
