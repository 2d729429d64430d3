import sys

from sddc.cli.main import main

sys.exit(main())
