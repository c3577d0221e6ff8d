import sys

from dsid.cli import main

if __name__ == "__main__":
    sys.exit(main())
