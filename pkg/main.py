#!/usr/bin/env python3

import sys

from clioptions import run

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
