"""Allow ``python3 -m rankot``."""

from .cli import main

main()
