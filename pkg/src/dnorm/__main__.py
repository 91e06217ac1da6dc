import sys

from dnorm.cli import main

sys.exit(main())
