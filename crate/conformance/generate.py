#!/usr/bin/env python3
"""Regenerates v1/*.json. Pure stdlib; PNGs are written by hand."""
import base64, json, struct, zlib, os

def png(w, h, ctype, px):
    ch = {0: 1, 2: 3, 6: 4}[ctype]
    raw = b''.join(b'\x00' + bytes(px[y*w*ch:(y+1)*w*ch]) for y in range(h))
    def chunk(t, d):
        c = t + d
        return struct.pack('>I', len(d)) + c + struct.pack('>I', zlib.crc32(c) & 0xffffffff)
    return (b'\x89PNG\r\n\x1a\n' + chunk(b'IHDR', struct.pack('>IIBBBBB', w, h, 8, ctype, 0, 0, 0))
            + chunk(b'IDAT', zlib.compress(raw, 9)) + chunk(b'IEND', b''))

b64 = lambda b: base64.b64encode(b).decode()
rgba = b64(png(4, 4, 6, [c for i in range(16) for c in ((120, 80, 40, 255) if i % 4 in (1, 2) else (0, 0, 0, 0))]))
rgb = b64(png(4, 4, 2, [c for i in range(16) for c in (30 + i * 10, 160, 90)]))
mask = b64(png(4, 4, 0, [255 if i % 4 in (1, 2) else 0 for i in range(16)]))
edge = b64(png(4, 4, 0, [255 if i % 4 == 1 else 0 for i in range(16)]))

vectors = [
    dict(id="chat_narrator_ok", path="/v1/chat",
         request=dict(role="narrator", system_prompt="", user_prompt="You are an analyst and observer. Describe the object.",
                      image_b64=rgba, response_schema_id="foreground_description", seed=7),
         expect=dict(status=200, response={"text": "Here you go:\n```json\n{\"description\": \"a red wooden chair with four legs\", \"name\": \"wooden chair\", \"viewpoint\": \"horizontal view\"}\n```"},
                     schema=dict(params={}, valid=True))),
    dict(id="chat_narrator_missing_viewpoint", path="/v1/chat",
         request=dict(role="narrator", system_prompt="", user_prompt="Describe the object.", image_b64=rgba,
                      response_schema_id="foreground_description"),
         expect=dict(status=200, response={"text": "{\"name\": \"chair\"}"}, schema=dict(params={}, valid=False, field="viewpoint"))),
    dict(id="chat_thinker_ok", path="/v1/chat",
         request=dict(role="thinker", system_prompt="", user_prompt="Please give 5 sets of relevant scene descriptions.",
                      response_schema_id="scene_set", seed=7),
         expect=dict(status=200, response={"text": json.dumps({"scenes": ["a sunlit cafe terrace, horizontal view", "a quiet library, horizontal view",
                     "a seaside deck, horizontal view", "a rustic kitchen, horizontal view", "a rooftop garden, horizontal view"]})},
                     schema=dict(params={"count": 5}, valid=True))),
    dict(id="chat_thinker_short", path="/v1/chat",
         request=dict(role="thinker", system_prompt="", user_prompt="Please give 5 sets of relevant scene descriptions.",
                      response_schema_id="scene_set"),
         expect=dict(status=200, response={"text": "{\"scenes\": [\"a beach\", \"a kitchen\"]}"},
                     schema=dict(params={"count": 5}, valid=False, field="scenes"))),
    dict(id="chat_thinker_with_image", path="/v1/chat",
         request=dict(role="thinker", system_prompt="", user_prompt="Please give 5 sets.", image_b64=rgba, response_schema_id="scene_set"),
         expect=dict(status=422, violation="image")),
    dict(id="chat_ranker_ok", path="/v1/chat",
         request=dict(role="ranker", system_prompt="", user_prompt="Please give me the sort number (from 1 to 5).",
                      response_schema_id="scene_ranking", seed=7),
         expect=dict(status=200, response={"text": "{\"ranks\": [3, 1, 5, 2, 4]}"}, schema=dict(params={"count": 5}, valid=True))),
    dict(id="chat_ranker_duplicate", path="/v1/chat",
         request=dict(role="ranker", system_prompt="", user_prompt="Please give me the sort number (from 1 to 5).",
                      response_schema_id="scene_ranking"),
         expect=dict(status=200, response={"text": "{\"ranks\": [1, 1, 3, 4, 5]}"}, schema=dict(params={"count": 5}, valid=False, field="ranks[1]"))),
    dict(id="chat_analyzer_ok", path="/v1/chat",
         request=dict(role="analyzer", system_prompt="", user_prompt="You are an analyst expert and an observer of detail.",
                      image_b64=rgb, response_schema_id="analysis_answers", seed=7),
         expect=dict(status=200, response={"text": json.dumps({"answers": {"common_context": "yes", "placed_normally": "no"}})},
                     schema=dict(params={"questions": ["common_context", "placed_normally"], "require_aesthetic": False}, valid=True))),
    dict(id="chat_analyzer_without_image", path="/v1/chat",
         request=dict(role="analyzer", system_prompt="", user_prompt="You are an analyst expert.", response_schema_id="analysis_answers"),
         expect=dict(status=422, violation="image")),
    dict(id="chat_empty_prompt", path="/v1/chat",
         request=dict(role="ranker", system_prompt="", user_prompt="", response_schema_id="scene_ranking"),
         expect=dict(status=422, violation="user_prompt")),
    dict(id="image_segment_ok", path="/v1/image",
         request=dict(task="segment", images={"image": rgb}, seed=7),
         expect=dict(status=200, response={"mask_b64": mask}, dims=[4, 4])),
    dict(id="image_canny2img_ok", path="/v1/image",
         request=dict(task="canny2img", images={"edge": edge}, prompt="a sunlit cafe terrace, wooden chair, horizontal view", seed=7),
         expect=dict(status=200, response={"image_b64": rgb}, dims=[4, 4])),
    dict(id="image_canny2img_missing_prompt", path="/v1/image",
         request=dict(task="canny2img", images={"edge": edge}, seed=7),
         expect=dict(status=422, violation="prompt")),
    dict(id="image_inpaint_ok", path="/v1/image",
         request=dict(task="inpaint", images={"image": rgb, "mask": mask}, prompt="a sunlit cafe terrace",
                      negative_prompt="wooden chair", seed=7),
         expect=dict(status=200, response={"image_b64": rgb}, dims=[4, 4])),
    dict(id="image_inpaint_missing_mask", path="/v1/image",
         request=dict(task="inpaint", images={"image": rgb}, prompt="a sunlit cafe terrace", seed=7),
         expect=dict(status=422, violation="mask")),
    dict(id="image_img2img_ok", path="/v1/image",
         request=dict(task="img2img", images={"image": rgb}, prompt="a sunlit cafe terrace, wooden chair, horizontal view",
                      seed=7, strength=0.3),
         expect=dict(status=200, response={"image_b64": rgb}, dims=[4, 4])),
    dict(id="image_img2img_bad_strength", path="/v1/image",
         request=dict(task="img2img", images={"image": rgb}, prompt="a cafe", seed=7, strength=1.5),
         expect=dict(status=422, violation="strength")),
    dict(id="health_ok", path="/v1/health", request=None,
         expect=dict(status=200, response={"status": "ok", "roles": ["narrator", "thinker", "ranker", "analyzer",
                     "segmenter", "template_generator", "inpainter", "refiner"]})),
]
for v in vectors:
    with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "v1", v["id"] + ".json"), "w") as f:
        json.dump(v, f, indent=2, sort_keys=True)
        f.write("\n")
print(len(vectors))
