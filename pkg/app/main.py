import logging
import sys

from app.core.config import settings

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

from app.cli import main  # noqa: E402


def run() -> None:
    logger.debug(f"{settings.PROJECT_NAME} {settings.VERSION} starting")
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
