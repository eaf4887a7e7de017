import sys

from qdarray.main import main

sys.exit(main())
