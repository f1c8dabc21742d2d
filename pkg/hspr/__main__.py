"""python -m hspr"""
import sys

from .cli import main

sys.exit(main())
