"""
Pointwise Information-Estimation Identities
Command line entry point
"""

import os
import sys

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__)))

from cli.commands import main

if __name__ == "__main__":
    main()
