"""Line-protocol test model: the score is the first feature."""
import json
import sys

for line in sys.stdin:
    request = json.loads(line)
    print(json.dumps({"score": request["values"][0]}), flush=True)
