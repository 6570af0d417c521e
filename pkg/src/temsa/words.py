"""Built-in English dictionary backing the default language-identification heuristic.

Roughly the thousand most frequent English words (function words plus common
nouns/verbs/adjectives and a handful of everyday inflections).  Deliberately
small: the predicate only needs enough coverage to separate English captions
from non-English ones, and callers can always inject their own predicate.
"""

from __future__ import annotations

ENGLISH_WORDS: frozenset[str] = frozenset("""
a about above across act actually add afraid after afternoon again against age
ago agree air all almost alone along already also although always am among an
and angry animal animals another answer any anyone anything appear apple are
area arm arms army around arrive art as ask at away baby back bad bag ball
bank base be beautiful became because become bed been before began begin
behind being believe bell belong below beside best better between big bird
birds bit black blue boat body book books born both bottom box boy boys bread
break bright bring brother brought brown bucket build building built bus
business busy but buy by call came can cannot car care carry case cat catch
cause cent center certain chair chance change character check chief child
children choose church circle city class clean clear climb close clothes cloud
cold color come common company complete computer consider contain continue
cool corner could country course cover cried cross crowd cry cup cut dance
dark day days dead deal dear decide decided deep did didn't die different
direction do does dog dogs dollar don't done door down draw dream dress drink
drive drop dry during each ear early earth east easy eat edge education effect
egg eight either else end english enjoy enough enter entire equal especially
even evening ever every everyone everything exactly example except experience
explain eye eyes face fact fall false families family famous far farm fast
father fear feed feel feet fell felt few field fight figure fill filled final
finally find fine finger finish finished fire first fish fit five flag floor
flower fly follow food foot for force forest forget form found four free
fresh friend friends from front fruit full fun funny future game garden gave
general genuine get girl girls give glad glass go gold gone good got
government grass great green grew ground group grow guess had hair half hand
hands happen happened happy hard has hat have he head hear heard heart heat
heavy held hello help her here herself high hill him himself his history hit
hold home hope horse hot hour hours house how however huge human hundred hurt
i ice idea if important in inside instead interest interesting into is island
it its itself job join joy jump just keep kept key kid kids kill kind king
knew know known lady lake land language large last late later laugh law lay
lead learn leave left leg legs less let letter level lie life lift light like
likely line list listen little live lived long look lost lot loud love low
machine made main make man many map mark market matter may maybe me mean
measure meet member men middle might mile milk million mind mine minute miss
moment money month moon more morning most mother mountain mouth move movie
much music must my myself name nation natural near nearly need needed never
new news next nice night nine no north nose not note nothing notice now
number object ocean of off office often oh oil old on once one only open or
order other our out outside over own page pages paid paint pair paper part
party pass past pay peace people perhaps person phone picture piece place
plain plan plane plant play please point poor position possible power present
president press pretty probably problem produce product public pull push put
question quick quickly quiet quite race rain raise ran reach read ready real
really reason received record red region remain remember rest result return
rich ride right ring rise river road rock roll room round rule run sad safe
said same sand sat save saw say school science sea season seat second see
seem seen self sell send sense sent sentence serve set seven several shall
shape she ship shoe shop short should shoulder show shown side sign silver
simple since sing single sister sit six size sky sleep slow slowly small
smile snow so soft soil sold soldier some someone something sometimes son
song soon sound south space speak special speed spell spend spot spread
spring stand star start state stay step still stone stood stop store story
straight strange street strong student study subject such suddenly summer sun
sure surface surprise sweet system table tail take talk tall teach teacher
team tell ten test than thank that the their them themselves then there these
they thing things think third this those though thought thousand three
through throw time tiny to today together told tomorrow too took top total
touch toward town trade train travel tree trees tried trip trouble true try
turn two type under understand unit until up upon us use usually valley value
very view village visit voice wait walk wall want war warm was wash watch
water wave way we wear weather week welcome well went were west what wheel
when where whether which while white who whole whose why wide wife wild will
win wind window winter wish with within without woman women wonder wood word
words wore work world would write written wrong wrote yard year years yes yet
you young your yourself
""".split())
