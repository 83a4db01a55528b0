import sys

from cli.main import dispatch

sys.exit(dispatch())
