"""
Download of public social-recommendation datasets
"""

import bz2
import logging
import shutil
import zipfile
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import requests
from requests.adapters import HTTPAdapter, Retry

from ..exceptions import ConfigurationError, InputError

logger = logging.getLogger(__name__)

# name -> {local file name: (url, archive member or None, compression)}
DATASETS: Dict[str, Dict[str, Tuple[str, Optional[str], str]]] = {
    "filmtrust": {
        "ratings.txt": ("https://guoguibing.github.io/librec/datasets/filmtrust.zip", "ratings.txt", "zip"),
        "trust.txt": ("https://guoguibing.github.io/librec/datasets/filmtrust.zip", "trust.txt", "zip"),
    },
    "epinions": {
        "ratings.txt": ("http://www.trustlet.org/datasets/downloaded_epinions/ratings_data.txt.bz2", None, "bz2"),
        "trust.txt": ("http://www.trustlet.org/datasets/downloaded_epinions/trust_data.txt.bz2", None, "bz2"),
    },
}


class DatasetFetcher:
    """
    Retrying HTTP downloader for the known datasets

    Downloads are cached under the destination directory; a file that is
    already present is not fetched again.
    """

    def __init__(self, timeout: int = 60, max_retries: int = 3):
        """
        Initialize a fetcher

        Args:
            timeout: Request timeout in seconds
            max_retries: Maximum number of retry attempts
        """
        self.timeout = timeout
        self.session = requests.Session()
        retry_strategy = Retry(
            total=max_retries,
            backoff_factor=0.5,
            status_forcelist=[429, 500, 502, 503, 504],
            allowed_methods=["GET"],
        )
        adapter = HTTPAdapter(max_retries=retry_strategy)
        self.session.mount("http://", adapter)
        self.session.mount("https://", adapter)

    def close(self):
        """Close the HTTP session"""
        self.session.close()

    def __enter__(self) -> "DatasetFetcher":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def download(self, url: str, target: Path) -> Path:
        """
        Stream a URL to a file

        Raises:
            InputError: The request failed after retries
        """
        target.parent.mkdir(parents=True, exist_ok=True)
        partial = target.with_suffix(target.suffix + ".part")
        logger.info(f"Downloading {url}")
        try:
            with self.session.get(url, stream=True, timeout=self.timeout) as response:
                response.raise_for_status()
                with partial.open("wb") as handle:
                    for chunk in response.iter_content(chunk_size=1 << 16):
                        handle.write(chunk)
        except requests.exceptions.RequestException as e:
            logger.error(f"Download of {url} failed: {str(e)}")
            partial.unlink(missing_ok=True)
            raise InputError(f"could not download {url}: {str(e)}")
        partial.replace(target)
        return target

    def fetch(self, name: str, dest: Union[str, Path]) -> Dict[str, Path]:
        """
        Fetch and unpack a dataset

        Args:
            name: Dataset name (filmtrust or epinions)
            dest: Destination directory

        Returns:
            Local file name -> path of the unpacked file

        Raises:
            ConfigurationError: Unknown dataset name
            InputError: Download or extraction failure
        """
        if name not in DATASETS:
            raise ConfigurationError(f"unknown dataset {name!r}; known: {', '.join(sorted(DATASETS))}")
        dest = Path(dest) / name
        archives = dest / "archives"
        files = {}
        for local_name, (url, member, compression) in DATASETS[name].items():
            target = dest / local_name
            if target.exists():
                logger.info(f"Using cached {target}")
                files[local_name] = target
                continue
            archive = archives / url.rsplit("/", 1)[-1]
            if not archive.exists():
                self.download(url, archive)
            files[local_name] = _unpack(archive, member, compression, target)
        return files


def _unpack(archive: Path, member: Optional[str], compression: str, target: Path) -> Path:
    try:
        if compression == "zip":
            with zipfile.ZipFile(archive) as bundle:
                matches = [n for n in bundle.namelist() if n.rsplit("/", 1)[-1] == member]
                if not matches:
                    raise InputError(f"{archive} has no member {member}")
                with bundle.open(matches[0]) as source, target.open("wb") as sink:
                    shutil.copyfileobj(source, sink)
        else:
            with bz2.open(archive, "rb") as source, target.open("wb") as sink:
                shutil.copyfileobj(source, sink)
    except (OSError, zipfile.BadZipFile) as e:
        target.unlink(missing_ok=True)
        raise InputError(f"could not unpack {archive}: {str(e)}")
    return target


def fetch_dataset(name: str, dest: Union[str, Path]) -> Dict[str, Path]:
    """Download and unpack a known dataset into ``dest/name``"""
    with DatasetFetcher() as fetcher:
        return fetcher.fetch(name, dest)
