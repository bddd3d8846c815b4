#!/usr/bin/env python3


from datetime import datetime

import dateutil.parser
import pytz
import tzlocal


def get_now_with_timezone() -> datetime:
    utc_now = datetime.now(tz=pytz.utc)
    local_zone = tzlocal.get_localzone()
    local_now = utc_now.astimezone(local_zone)

    return local_now


def parse_timestamp(value: str) -> datetime:
    return dateutil.parser.isoparse(value)
