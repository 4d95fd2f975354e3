import sys

from mlsa_risk.cli import main

sys.exit(main())
