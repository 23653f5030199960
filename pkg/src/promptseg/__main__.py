import sys

from promptseg.cli import main

sys.exit(main())
