import logging
import sys

from msplab.cli.commands import dispatch
from msplab.core.config import settings

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.MSP_LOG_LEVEL.upper(), logging.INFO),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


def main() -> None:
    logger.debug(f"{settings.APP_NAME} {settings.APP_VERSION}")
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
