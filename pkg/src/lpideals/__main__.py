from .cli_lab import main
import sys

sys.exit(main())
