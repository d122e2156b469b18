import sys

from hapticid.cli import main

sys.exit(main())
