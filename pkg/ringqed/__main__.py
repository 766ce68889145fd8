import sys

from ringqed.main import main

sys.exit(main())
