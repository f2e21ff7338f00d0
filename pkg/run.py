import sys

from loguru import logger

from qns.cli import main

# Remove previous default handlers
logger.remove()
# Log to console
logger.add(sys.stdout, level="DEBUG" if "--verbose" in sys.argv else "INFO")
# Log to file, max size 1 mb
logger.add("qns.log", rotation="1 MB", retention="1 month", level="INFO")


if __name__ == "__main__":
    sys.exit(main())
